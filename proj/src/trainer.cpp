#include "nair/trainer.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "nair/error.hpp"
#include "nair/evaluation.hpp"
#include "nair/inference.hpp"

namespace nair {

namespace {

// Dropout masks come from their own stream so that changing the batch size
// does not perturb the shuffle order.
constexpr std::uint64_t kDropoutStream = 0x9e3779b97f4a7c15ULL;

template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    if (j >= i) j = i - 1;
    std::swap(items[i - 1], items[j]);
  }
}

Tensor batch_loss(const NairModel& model, std::span<const Instance> batch, const TrainConfig& config,
                  const ForwardContext& ctx) {
  std::vector<Tensor> losses;
  losses.reserve(batch.size());
  for (const Instance& inst : batch) losses.push_back(task_loss(model, inst, config.alpha, config.beta, ctx));
  return mean(losses);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) throw ConfigError("dropout keep must lie in (0, 1]");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("loss weights must be non-negative");
  if (max_caption_length == 0) throw ConfigError("max caption length must be >= 1");
  if (clip_norm < 0.0) throw ConfigError("clip norm must be >= 0");
}

std::vector<Instance> make_instances(const Dataset& dataset, Split split, const Vocabulary& vocab,
                                     std::size_t max_caption_length, std::size_t comments_per_image) {
  std::vector<Instance> out;
  for (const ReviewExample* ex : dataset.split(split)) {
    auto comments = comment_tokens(*ex, max_caption_length);
    if (comments_per_image != 0 && comments.size() > comments_per_image) comments.resize(comments_per_image);
    for (const auto& tokens : comments) {
      if (tokens.empty()) continue;
      out.push_back(Instance{ex->input, ex->label, encode_caption(tokens, vocab)});
    }
  }
  return out;
}

void apply_sgd(const ParameterMap& params, double learning_rate, double clip_norm) {
  double factor = learning_rate;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      for (double g : p.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) factor *= clip_norm / norm;
  }
  for (const auto& [name, param] : params) {
    if (!param.has_grad()) continue;
    Tensor p = param;
    const std::vector<double> g = p.grad();
    auto data = p.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= factor * g[i];
  }
}

double sgd_step(NairModel& model, std::span<const Instance> batch, const TrainConfig& config,
                std::mt19937_64& rng, std::string_view batch_label) {
  if (batch.empty()) throw ContractError("sgd_step needs a non-empty batch");
  const Shape expected = model.input_shape();
  for (const Instance& inst : batch) {
    if (inst.input.shape() != expected)
      throw DimensionError("batch input shape " + shape_to_string(inst.input.shape()) + " does not match model input " +
                           shape_to_string(expected));
  }
  for (const auto& [name, p] : model.parameters()) {
    Tensor t = p;
    t.zero_grad();
  }
  double value = 0.0;
  {
    Tape tape;
    ForwardContext ctx{true, config.dropout_keep, &rng};
    Tensor loss;
    try {
      loss = batch_loss(model, batch, config, ctx);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " in " + std::string(batch_label));
    }
    value = loss.item();
    if (!std::isfinite(value))
      throw NumericError("non-finite loss in " + std::string(batch_label));
    tape.backward(loss);
  }
  apply_sgd(trainable_parameters(model), config.learning_rate, config.clip_norm);
  for (const auto& [name, p] : model.parameters()) {
    Tensor t = p;
    t.zero_grad();
  }
  return value;
}

double evaluate_loss(const NairModel& model, std::span<const Instance> instances, const TrainConfig& config) {
  if (instances.empty()) throw ConfigError("cannot evaluate the loss of an empty split");
  NoTapeGuard guard;
  return batch_loss(model, instances, config, ForwardContext{}).item();
}

std::optional<double> evaluate_accuracy(const NairModel& model, std::span<const ReviewExample* const> examples) {
  if (!model.classifier || examples.empty()) return std::nullopt;
  std::vector<Label> predicted, actual;
  for (const ReviewExample* ex : examples) {
    predicted.push_back(predict_class(model, ex->input).label);
    actual.push_back(ex->label);
  }
  return overall_accuracy(predicted, actual);
}

TrainResult train(const NairModel& initial, const Dataset& dataset, const Vocabulary& vocab,
                  const TrainConfig& config) {
  config.validate();
  TrainResult result{initial.clone(), initial.clone(), {}, {}, std::numeric_limits<double>::infinity()};
  if (config.epochs == 0) return result;

  std::vector<Instance> train_set =
      make_instances(dataset, Split::kTrain, vocab, config.max_caption_length, config.comments_per_image);
  const std::vector<Instance> valid_set =
      make_instances(dataset, Split::kValid, vocab, config.max_caption_length, config.comments_per_image);
  const auto valid_examples = dataset.split(Split::kValid);
  if (train_set.empty()) throw ConfigError("train split is empty");
  if (valid_set.empty()) throw ConfigError("valid split is empty");

  NairModel& model = result.final_model;
  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ kDropoutStream);
  std::size_t steps = 0;
  bool stop = false;
  for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
    shuffle(train_set, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < train_set.size(); begin += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, train_set.size() - begin);
      const std::string label = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batches);
      const double loss =
          sgd_step(model, std::span<const Instance>(train_set).subspan(begin, len), config, dropout_rng, label);
      result.step_losses.push_back(loss);
      loss_sum += loss;
      ++batches;
      ++steps;
      if (config.max_steps != 0 && steps >= config.max_steps) {
        stop = true;
        break;
      }
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(batches);
    m.valid_loss = evaluate_loss(model, valid_set, config);
    m.valid_accuracy = evaluate_accuracy(model, valid_examples);
    if (!std::isfinite(m.valid_loss)) throw NumericError("non-finite validation loss in epoch " + std::to_string(epoch));
    if (m.valid_loss < result.best_valid_loss) {
      result.best_valid_loss = m.valid_loss;
      result.best_model.copy_parameters_from(model.parameters());
    }
    result.log.push_back(m);
  }
  return result;
}

std::string metrics_log_csv(std::span<const EpochMetrics> log) {
  std::string out = "epoch,train_loss,valid_loss,valid_accuracy\n";
  for (const EpochMetrics& m : log) {
    out += std::to_string(m.epoch) + "," + format_double(m.train_loss) + "," + format_double(m.valid_loss) + ",";
    if (m.valid_accuracy) out += format_double(*m.valid_accuracy);
    out += "\n";
  }
  return out;
}

GridResult evaluate_grid_point(const ModelFactory& factory, const Dataset& dataset, const Vocabulary& vocab,
                               GridPoint point, const TrainConfig& config) {
  TrainConfig cfg = config;
  cfg.alpha = point.alpha;
  cfg.beta = point.beta;
  const TrainResult trained = train(factory(), dataset, vocab, cfg);
  const NairModel& model = trained.best_model;
  const auto valid = dataset.split(Split::kValid);

  GridResult r;
  r.point = point;
  r.valid_accuracy = evaluate_accuracy(model, valid).value_or(0.0);
  if (model.output && !valid.empty()) {
    DecodeOptions opts;
    opts.beam_size = 1;
    opts.max_len = cfg.max_caption_length;
    const auto corpus = caption_corpus(model, valid, vocab, opts);
    r.valid_bleu1 = bleu(corpus, 1);
  }
  return r;
}

TuneResult tune_alpha_beta(const ModelFactory& factory, const Dataset& dataset, const Vocabulary& vocab,
                           std::span<const GridPoint> grid, const TrainConfig& config) {
  if (grid.empty()) throw ConfigError("alpha/beta grid is empty");
  TuneResult out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.evaluated.push_back(evaluate_grid_point(factory, dataset, vocab, grid[i], config));
    const GridResult& cur = out.evaluated.back();
    const GridResult& top = out.evaluated[best];
    if (cur.valid_accuracy > top.valid_accuracy ||
        (cur.valid_accuracy == top.valid_accuracy && cur.valid_bleu1 > top.valid_bleu1))
      best = i;
  }
  out.best = out.evaluated[best].point;
  return out;
}

std::vector<GridPoint> grid_product(std::span<const double> values) {
  std::vector<GridPoint> grid;
  for (double a : values)
    for (double b : values) grid.push_back(GridPoint{a, b});
  return grid;
}

}  // namespace nair
