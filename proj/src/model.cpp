#include "nair/model.hpp"

#include <random>

#include "nair/error.hpp"

namespace nair {

std::string_view variant_name(Variant variant) {
  switch (variant) {
    case Variant::kIAC:
      return "iac";
    case Variant::kV2L:
      return "v2l";
    case Variant::kMTBaseline:
      return "mt-baseline";
    case Variant::kModelI:
      return "model1";
    case Variant::kModelII:
      return "model2";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::kIAC, Variant::kV2L, Variant::kMTBaseline, Variant::kModelI,
                    Variant::kModelII}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

bool is_multi_task(Variant variant) {
  return variant == Variant::kMTBaseline || variant == Variant::kModelI ||
         variant == Variant::kModelII;
}

bool has_classifier(Variant variant) { return variant != Variant::kV2L; }

bool has_generator(Variant variant) { return variant != Variant::kIAC; }

ModelConfig ModelConfig::defaults(Variant variant, std::size_t vocab_size) {
  ModelConfig config;
  config.variant = variant;
  config.vocab_size = vocab_size;
  if (variant == Variant::kMTBaseline) {
    config.encoder_mode = EncoderMode::kTrainableTiny;
    config.feature_width = 64;
  }
  if (variant == Variant::kModelII) {
    config.shared_width = 256;
    config.specific_width = 256;
  }
  return config;
}

void ModelConfig::validate() const {
  if (variant == Variant::kMTBaseline && encoder_mode != EncoderMode::kTrainableTiny) {
    throw ConfigError("the MT baseline trains its image encoder; use the tiny encoder mode");
  }
  if ((variant == Variant::kModelI || variant == Variant::kModelII) &&
      encoder_mode != EncoderMode::kFrozenFeatures) {
    throw ConfigError(std::string(variant_name(variant)) + " requires frozen image features");
  }
  if (feature_width == 0 || embed_width == 0 || hidden_width == 0 || lstm_layers == 0) {
    throw ConfigError("model widths must be positive");
  }
  if ((variant == Variant::kModelI || variant == Variant::kModelII) && shared_width == 0) {
    throw ConfigError("shared layer width must be positive");
  }
  if (variant == Variant::kModelII && specific_width == 0) {
    throw ConfigError("task-specific layer width must be positive");
  }
  if (has_generator(variant) && vocab_size <= token::kEnd) {
    throw ConfigError("vocabulary must contain the reserved tokens");
  }
  if (!(init_range > 0.0)) throw ConfigError("init range must be positive");
}

NairModel::NairModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(config_.seed);
  const ParamInit init{rng, config_.init_range};
  const Variant v = config_.variant;
  const std::size_t f = config_.feature_width;

  if (config_.encoder_mode == EncoderMode::kTrainableTiny) {
    encoder = TinyEncoder::create(f, init);
    encoder->register_parameters("encoder", params_);
  }
  if (v == Variant::kModelI || v == Variant::kModelII) {
    shared = DenseLayer::create(f, config_.shared_width, Activation::kRelu, init);
    shared->register_parameters("shared", params_);
  }
  if (v == Variant::kModelII) {
    cls_specific = DenseLayer::create(f, config_.specific_width, Activation::kRelu, init);
    cls_specific->register_parameters("cls_specific", params_);
    gen_specific = DenseLayer::create(f, config_.specific_width, Activation::kRelu, init);
    gen_specific->register_parameters("gen_specific", params_);
  }
  if (has_classifier(v)) {
    classifier = DenseLayer::create(rep_cls_width(), 2, Activation::kNone, init);
    classifier->register_parameters("classifier", params_);
  }
  if (has_generator(v)) {
    if (rep_gen_width() != config_.embed_width) {
      image_proj = DenseLayer::create(rep_gen_width(), config_.embed_width, Activation::kNone, init);
      image_proj->register_parameters("image_proj", params_);
    }
    embedding = EmbeddingTable::create(config_.vocab_size, config_.embed_width, init);
    params_.emplace("embedding.table", embedding->table);
    for (std::size_t l = 0; l < config_.lstm_layers; ++l) {
      const std::size_t in = l == 0 ? config_.embed_width : config_.hidden_width;
      lstm.push_back(LSTMCell::create(in, config_.hidden_width, init, config_.forget_bias));
      lstm.back().register_parameters("lstm.l" + std::to_string(l), params_);
    }
    output = DenseLayer::create(config_.hidden_width, config_.vocab_size, Activation::kNone, init);
    output->register_parameters("output", params_);
  }
}

Shape NairModel::input_shape() const {
  if (encoder) return Shape{TinyEncoder::kChannels, TinyEncoder::kImageSide, TinyEncoder::kImageSide};
  return Shape{config_.feature_width};
}

std::size_t NairModel::rep_cls_width() const {
  switch (config_.variant) {
    case Variant::kModelI:
      return config_.shared_width;
    case Variant::kModelII:
      return config_.specific_width + config_.shared_width;
    default:
      return config_.feature_width;
  }
}

std::size_t NairModel::rep_gen_width() const { return rep_cls_width(); }

NairModel NairModel::clone() const {
  NairModel copy(config_);
  copy.copy_parameters_from(params_);
  return copy;
}

void NairModel::copy_parameters_from(const ParameterMap& source) {
  if (source.size() != params_.size()) {
    throw ConfigError("parameter set size mismatch: " + std::to_string(source.size()) + " vs " +
                      std::to_string(params_.size()));
  }
  for (auto& [name, tensor] : params_) {
    auto it = source.find(name);
    if (it == source.end()) throw ConfigError("missing parameter '" + name + "'");
    if (it->second.shape() != tensor.shape()) {
      throw DimensionError("parameter '" + name + "' has shape " +
                           shape_to_string(it->second.shape()) + ", expected " +
                           shape_to_string(tensor.shape()));
    }
    auto dst = tensor.mutable_data();
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

// ---------------------------------------------------------------------------

Tensor encode_image(const NairModel& model, const Tensor& input) {
  if (input.shape() != model.input_shape()) {
    throw DimensionError("model expects input " + shape_to_string(model.input_shape()) + ", got " +
                         shape_to_string(input.shape()));
  }
  if (model.encoder) return model.encoder->forward(input);
  return input;
}

Representation representation(const NairModel& model, const Tensor& v) {
  if (v.rank() != 1 || v.size() != model.config().feature_width) {
    throw DimensionError("representation expects features of width " +
                         std::to_string(model.config().feature_width) + ", got " +
                         shape_to_string(v.shape()));
  }
  switch (model.variant()) {
    case Variant::kModelI: {
      Tensor share = model.shared->forward(v);
      return Representation{share, share};
    }
    case Variant::kModelII: {
      Tensor share = model.shared->forward(v);
      return Representation{concat(model.cls_specific->forward(v), share),
                            concat(model.gen_specific->forward(v), share)};
    }
    default:
      return Representation{v, v};
  }
}

Tensor class_logits(const NairModel& model, const Tensor& rep_cls) {
  if (!model.classifier) {
    throw ContractError(std::string(variant_name(model.variant())) + " has no classifier");
  }
  return model.classifier->forward(rep_cls);
}

Tensor aesthetics_loss(const NairModel& model, const Tensor& rep_cls, Label label) {
  return cross_entropy(class_logits(model, rep_cls), static_cast<std::size_t>(label));
}

Tensor aesthetics_loss(const NairModel& model, std::span<const Tensor> rep_cls,
                       std::span<const Label> labels) {
  if (rep_cls.size() != labels.size()) throw ContractError("aesthetics_loss: batch size mismatch");
  std::vector<Tensor> losses;
  losses.reserve(rep_cls.size());
  for (std::size_t i = 0; i < rep_cls.size(); ++i) {
    losses.push_back(aesthetics_loss(model, rep_cls[i], labels[i]));
  }
  return mean(losses);
}

namespace {

const NairModel& require_generator(const NairModel& model) {
  if (!model.output) {
    throw ContractError(std::string(variant_name(model.variant())) + " has no caption generator");
  }
  return model;
}

Tensor feed(const NairModel& model, DecoderState& state, const Tensor& x, const ForwardContext& ctx) {
  Tensor input = ctx.maybe_dropout(x);
  for (std::size_t l = 0; l < model.lstm.size(); ++l) {
    state.layers[l] = model.lstm[l].step(state.layers[l], input);
    input = state.layers[l].h;
  }
  return input;
}

}  // namespace

DecoderState decoder_start(const NairModel& model, const Tensor& rep_gen, const ForwardContext& ctx) {
  require_generator(model);
  if (rep_gen.rank() != 1 || rep_gen.size() != model.rep_gen_width()) {
    throw DimensionError("generator expects representation width " +
                         std::to_string(model.rep_gen_width()) + ", got " +
                         shape_to_string(rep_gen.shape()));
  }
  DecoderState state;
  for (const LSTMCell& cell : model.lstm) state.layers.push_back(cell.zero_state());
  Tensor x = model.image_proj ? model.image_proj->forward(rep_gen) : rep_gen;
  feed(model, state, x, ctx);  // image step: no prediction
  return state;
}

Tensor decoder_step(const NairModel& model, DecoderState& state, std::size_t token,
                    const ForwardContext& ctx) {
  require_generator(model);
  Tensor h = feed(model, state, model.embedding->embed(token), ctx);
  return model.output->forward(ctx.maybe_dropout(h));
}

Tensor language_loss(const NairModel& model, const Tensor& rep_gen,
                     std::span<const std::size_t> caption, const ForwardContext& ctx,
                     std::vector<Tensor>* step_logits) {
  if (caption.empty()) throw ContractError("language_loss: empty caption");
  DecoderState state = decoder_start(model, rep_gen, ctx);
  std::vector<Tensor> terms;
  terms.reserve(caption.size() + 1);
  std::size_t previous = token::kStart;
  for (std::size_t t = 0; t <= caption.size(); ++t) {
    Tensor logits = decoder_step(model, state, previous, ctx);
    const std::size_t target = t < caption.size() ? caption[t] : token::kEnd;
    terms.push_back(cross_entropy(logits, target));
    if (step_logits) step_logits->push_back(logits);
    previous = target;
  }
  return sum(std::span<const Tensor>(terms));
}

ForwardOutput forward(const NairModel& model, const Instance& instance, double alpha, double beta,
                      const ForwardContext& ctx) {
  ForwardOutput out;
  Tensor v = encode_image(model, instance.input);
  Representation rep = representation(model, v);
  if (model.classifier) {
    Tensor logits = class_logits(model, rep.cls);
    out.class_logits = logits;
    out.losses.aesthetics = cross_entropy(logits, static_cast<std::size_t>(instance.label));
  }
  if (model.output) {
    out.losses.language = language_loss(model, rep.gen, instance.caption, ctx, &out.step_logits);
  }
  if (is_multi_task(model.variant())) {
    out.losses.total = scale(*out.losses.aesthetics, alpha) + scale(*out.losses.language, beta);
  } else {
    out.losses.total = out.losses.aesthetics ? *out.losses.aesthetics : *out.losses.language;
  }
  return out;
}

Tensor joint_loss(const NairModel& model, const Instance& instance, double alpha, double beta,
                  const ForwardContext& ctx) {
  if (!is_multi_task(model.variant())) {
    throw ContractError("joint loss is undefined for single-task variant " +
                        std::string(variant_name(model.variant())));
  }
  if (alpha < 0.0 || beta < 0.0) throw ConfigError("joint loss weights must be nonnegative");
  return forward(model, instance, alpha, beta, ctx).losses.total;
}

Tensor task_loss(const NairModel& model, const Instance& instance, double alpha, double beta,
                 const ForwardContext& ctx) {
  if (is_multi_task(model.variant())) return joint_loss(model, instance, alpha, beta, ctx);
  return forward(model, instance, 1.0, 1.0, ctx).losses.total;
}

bool is_encoder_parameter(const std::string& name) { return name.rfind("encoder.", 0) == 0; }

ParameterMap trainable_parameters(const NairModel& model) {
  ParameterMap out;
  const bool frozen_encoder = model.config().encoder_mode == EncoderMode::kFrozenFeatures;
  for (const auto& [name, tensor] : model.parameters()) {
    if (frozen_encoder && is_encoder_parameter(name)) continue;
    out.emplace(name, tensor);
  }
  return out;
}

double caption_log_prob(const NairModel& model, const Tensor& rep_gen,
                        std::span<const std::size_t> tokens) {
  NoTapeGuard no_tape;
  DecoderState state = decoder_start(model, rep_gen);
  double total = 0.0;
  std::size_t previous = token::kStart;
  for (std::size_t tok : tokens) {
    Tensor logp = log_softmax(decoder_step(model, state, previous));
    if (tok >= logp.size()) throw IndexError("caption token " + std::to_string(tok) + " out of range");
    total += logp[tok];
    previous = tok;
  }
  return total;
}

}  // namespace nair
