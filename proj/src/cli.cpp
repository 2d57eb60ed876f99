#include "nair/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nair/checkpoint.hpp"
#include "nair/error.hpp"
#include "nair/evaluation.hpp"
#include "nair/io.hpp"
#include "nair/metrics.hpp"
#include "nair/oracles/gradcheck.hpp"
#include "nair/trainer.hpp"

namespace nair::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t n_images = 100;
  std::string out;
  std::size_t feature_dim = 2048;
  std::size_t vocab_size = 16;
  std::size_t comments_per_image = 6;
  double separation = 3.0;
  bool raw_images = false;
};

struct VocabArgs {
  std::string data;
  std::size_t min_count = kDefaultMinCount;
  std::string out;
};

struct TrainArgs {
  std::string data;
  std::string variant;
  std::optional<double> alpha, beta;
  std::vector<double> tune_grid;
  std::size_t tune_epochs = 0;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  std::string out;
  std::string log;
  std::string vocab;
  double lr = 0.1;
  std::size_t batch_size = 32;
  double dropout_keep = 0.7;
  std::size_t max_steps = 0;
  std::size_t comments_per_image = 0;
  double clip_norm = 0.0;
  std::optional<std::size_t> embed, hidden, shared, specific, encoder_width;
};

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string vocab;
  std::size_t beam = 20;
  std::size_t max_len = kMaxCaptionLength;
  std::string split = "test";
  std::string report;
  std::string captions;
  bool table = false;
};

struct GenerateArgs {
  std::string ckpt;
  std::string features;
  std::string vocab;
  std::size_t beam = 20;
  std::size_t max_len = kMaxCaptionLength;
  bool greedy = false;
  std::string out;
};

struct GradArgs {
  std::uint64_t seed = 0;
  double max_error = 1e-4;
};

fs::path vocab_path(const std::string& flag, const fs::path& data_dir) {
  return flag.empty() ? data_dir / kVocabFile : fs::path(flag);
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.n_images = a.n_images;
  cfg.feature_dim = a.feature_dim;
  cfg.vocab_size = a.vocab_size;
  cfg.comments_per_image = a.comments_per_image;
  cfg.class_separation = a.separation;
  cfg.modality = a.raw_images ? Modality::kImages : Modality::kFeatures;
  const Dataset ds = synth_dataset(cfg);
  write_dataset(a.out, ds);
  out << "wrote " << ds.examples.size() << " " << modality_name(ds.modality) << " examples to " << a.out << "\n";
  return kExitOk;
}

int cmd_vocab(const VocabArgs& a, std::ostream& out) {
  const Dataset ds = read_dataset(a.data);
  const auto corpus = ds.corpus(Split::kTrain);
  const Vocabulary vocab = Vocabulary::build(corpus, a.min_count);
  const fs::path path = vocab_path(a.out, a.data);
  write_vocab(path, vocab);
  out << "vocabulary of " << vocab.size() << " tokens (min count " << a.min_count << ") written to "
      << path.string() << "\n";
  return kExitOk;
}

ModelConfig model_config(const TrainArgs& a, Variant variant, const Dataset& ds, const Vocabulary& vocab) {
  ModelConfig cfg = ModelConfig::defaults(variant, vocab.size());
  cfg.seed = a.seed;
  if (ds.modality == Modality::kImages) {
    if (variant != Variant::kMTBaseline)
      throw ConfigError(std::string(variant_name(variant)) +
                        " consumes precomputed features; this dataset holds raw images");
    if (a.encoder_width) cfg.feature_width = *a.encoder_width;
  } else {
    if (variant == Variant::kMTBaseline)
      throw ConfigError("mt-baseline trains its own encoder and needs raw images (synth-data --raw-images)");
    cfg.feature_width = ds.examples.front().input.size();
  }
  if (a.embed) cfg.embed_width = *a.embed;
  if (a.hidden) cfg.hidden_width = *a.hidden;
  if (a.shared) cfg.shared_width = *a.shared;
  if (a.specific) cfg.specific_width = *a.specific;
  cfg.validate();
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Variant variant = parse_variant(a.variant);
  const bool tune = !a.tune_grid.empty();
  if (tune && (a.alpha || a.beta)) throw ConfigError("--tune-grid replaces --alpha/--beta; pass one or the other");
  if (tune && !is_multi_task(variant))
    throw ConfigError("--tune-grid only applies to multi-task variants");

  const Dataset ds = read_dataset(a.data);
  if (ds.examples.empty()) throw DataError("dataset in " + a.data + " has no examples");
  const Vocabulary vocab = read_vocab(vocab_path(a.vocab, a.data));
  const ModelConfig mcfg = model_config(a, variant, ds, vocab);

  TrainConfig tcfg;
  tcfg.learning_rate = a.lr;
  tcfg.batch_size = a.batch_size;
  tcfg.dropout_keep = a.dropout_keep;
  tcfg.epochs = a.epochs;
  tcfg.seed = a.seed;
  tcfg.alpha = a.alpha.value_or(1.0);
  tcfg.beta = a.beta.value_or(1.0);
  tcfg.max_steps = a.max_steps;
  tcfg.comments_per_image = a.comments_per_image;
  tcfg.clip_norm = a.clip_norm;
  tcfg.validate();

  if (tune) {
    TrainConfig short_cfg = tcfg;
    if (a.tune_epochs != 0) short_cfg.epochs = a.tune_epochs;
    const auto grid = grid_product(a.tune_grid);
    const TuneResult tuned = tune_alpha_beta([&] { return NairModel(mcfg); }, ds, vocab, grid, short_cfg);
    for (const GridResult& r : tuned.evaluated) {
      out << "grid alpha=" << r.point.alpha << " beta=" << r.point.beta
          << " valid_accuracy=" << fmt("%.4f", r.valid_accuracy) << " valid_bleu1=" << fmt("%.4f", r.valid_bleu1)
          << "\n";
    }
    tcfg.alpha = tuned.best.alpha;
    tcfg.beta = tuned.best.beta;
    out << "selected alpha=" << tcfg.alpha << " beta=" << tcfg.beta << "\n";
  }

  const TrainResult result = train(NairModel(mcfg), ds, vocab, tcfg);
  for (const EpochMetrics& m : result.log) {
    out << "epoch " << m.epoch << " train_loss=" << fmt("%.6f", m.train_loss)
        << " valid_loss=" << fmt("%.6f", m.valid_loss);
    if (m.valid_accuracy) out << " valid_accuracy=" << fmt("%.4f", *m.valid_accuracy);
    out << "\n";
  }
  save_checkpoint(result.best_model, a.out);
  const std::string log_path = a.log.empty() ? a.out + ".metrics.csv" : a.log;
  io::write_file(log_path, metrics_log_csv(result.log));
  out << "saved " << variant_name(variant) << " checkpoint to " << a.out << " (metrics log " << log_path << ")\n";
  return kExitOk;
}

DecodeOptions decode_options(std::size_t beam, std::size_t max_len) {
  if (beam == 0) throw ConfigError("--beam must be >= 1");
  if (max_len == 0) throw ConfigError("--max-len must be >= 1");
  DecodeOptions opts;
  opts.beam_size = beam;
  opts.max_len = max_len;
  return opts;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
  const DecodeOptions opts = decode_options(a.beam, a.max_len);
  const Split split = parse_split(a.split);
  const Dataset ds = read_dataset(a.data);
  const Vocabulary vocab = read_vocab(vocab_path(a.vocab, a.data));
  const NairModel model = load_checkpoint(a.ckpt);
  if (model.output && model.output->out_width() != vocab.size())
    throw DataError("checkpoint vocabulary size " + std::to_string(model.output->out_width()) +
                    " does not match " + std::to_string(vocab.size()) + " tokens in the vocabulary file");
  const auto examples = ds.split(split);
  const MetricReport report = evaluate_model(model, examples, vocab, opts);

  io::write_file(a.report, report_to_json(report).dump(2) + "\n");
  if (!a.captions.empty()) {
    std::vector<Tensor> inputs;
    for (const ReviewExample* ex : examples) inputs.push_back(ex->input);
    io::write_file(a.captions, format_predictions(model, inputs, vocab, opts));
  }
  if (a.table) out << report_to_table(report);
  out << "evaluated " << examples.size() << " " << split_name(split) << " examples, report written to " << a.report
      << "\n";
  return kExitOk;
}

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  const DecodeOptions opts = decode_options(a.greedy ? 1 : a.beam, a.max_len);
  const NairModel model = load_checkpoint(a.ckpt);
  const std::vector<Tensor> inputs = parse_inputs(io::read_file(a.features));
  const fs::path vpath = a.vocab.empty() ? fs::path(a.features).parent_path() / kVocabFile : fs::path(a.vocab);
  const Vocabulary vocab = model.output ? read_vocab(vpath) : Vocabulary();
  const std::string text = format_predictions(model, inputs, vocab, opts);
  if (a.out.empty()) {
    out << text;
  } else {
    io::write_file(a.out, text);
    out << "wrote predictions for " << inputs.size() << " inputs to " << a.out << "\n";
  }
  return kExitOk;
}

int cmd_grad_check(const GradArgs& a, std::ostream& out) {
  double worst = 0.0;
  for (const auto& r : oracles::gradient_check_suite(a.seed)) {
    out << variant_name(r.variant) << ": " << r.coordinates << " coordinates, max relative error "
        << fmt("%.3e", r.max_relative_error);
    if (!r.worst_parameter.empty()) out << " at " << r.worst_parameter;
    out << "\n";
    worst = std::max(worst, r.max_relative_error);
  }
  out << "max relative error " << fmt("%.3e", worst) << (worst <= a.max_error ? " (ok)" : " (FAILED)") << "\n";
  return worst <= a.max_error ? kExitOk : kExitNumeric;
}

}  // namespace

std::string format_predictions(const NairModel& model, std::span<const Tensor> inputs, const Vocabulary& vocab,
                               const DecodeOptions& options) {
  std::vector<Caption> captions;
  if (model.output) captions = decode_batch(model, inputs, options);
  std::string text;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    text += model.classifier ? std::string(label_name(predict_class(model, inputs[i]).label)) : "-";
    text += "\t";
    if (model.output) text += caption_text(captions[i], vocab);
    text += "\n";
  }
  return text;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint aesthetic classification and comment generation"};
  app.name("nair");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth-data", "Write a seeded synthetic dataset");
  s->add_option("--seed", synth.seed)->required();
  s->add_option("--n-images", synth.n_images)->required()->check(CLI::PositiveNumber);
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--feature-dim", synth.feature_dim)->check(CLI::PositiveNumber);
  s->add_option("--vocab-size", synth.vocab_size, "Distinct content nouns")->check(CLI::PositiveNumber);
  s->add_option("--comments-per-image", synth.comments_per_image)->check(CLI::PositiveNumber);
  s->add_option("--separation", synth.separation, "Class mean distance from the origin")->check(CLI::NonNegativeNumber);
  s->add_flag("--raw-images", synth.raw_images, "Emit 3x32x32 images instead of feature vectors");

  VocabArgs vocab;
  auto* v = app.add_subcommand("build-vocab", "Build vocab.txt from the train split");
  v->add_option("--data", vocab.data)->required()->check(CLI::ExistingDirectory);
  v->add_option("--min-count", vocab.min_count)->check(CLI::PositiveNumber);
  v->add_option("--out", vocab.out, "Defaults to DATA/vocab.txt");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model variant");
  t->add_option("--data", tr.data)->required()->check(CLI::ExistingDirectory);
  t->add_option("--variant", tr.variant)->required()->check(
      CLI::IsMember({"iac", "v2l", "mt-baseline", "model1", "model2"}));
  auto* alpha = t->add_option("--alpha", tr.alpha)->check(CLI::NonNegativeNumber);
  auto* beta = t->add_option("--beta", tr.beta)->check(CLI::NonNegativeNumber);
  auto* grid = t->add_option("--tune-grid", tr.tune_grid, "Candidate values; every (alpha, beta) pair is tried")
                   ->expected(0, -1)
                   ->default_str("0.25,0.5,1,2")
                   ->delimiter(',');
  grid->excludes(alpha)->excludes(beta);
  t->add_option("--tune-epochs", tr.tune_epochs, "Epochs per grid point (default: --epochs)");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--seed", tr.seed);
  t->add_option("--out", tr.out, "Checkpoint path")->required();
  t->add_option("--log", tr.log, "Metrics CSV (default: OUT.metrics.csv)");
  t->add_option("--vocab", tr.vocab, "Defaults to DATA/vocab.txt");
  t->add_option("--lr", tr.lr)->check(CLI::PositiveNumber);
  t->add_option("--batch-size", tr.batch_size)->check(CLI::PositiveNumber);
  t->add_option("--dropout-keep", tr.dropout_keep)->check(CLI::Range(0.0, 1.0));
  t->add_option("--max-steps", tr.max_steps, "Stop after this many SGD steps (0: no limit)");
  t->add_option("--comments-per-image", tr.comments_per_image, "0 uses every comment");
  t->add_option("--clip-norm", tr.clip_norm, "Global gradient norm clip (0: off)")->check(CLI::NonNegativeNumber);
  t->add_option("--embed", tr.embed)->check(CLI::PositiveNumber);
  t->add_option("--hidden", tr.hidden)->check(CLI::PositiveNumber);
  t->add_option("--shared", tr.shared)->check(CLI::PositiveNumber);
  t->add_option("--specific", tr.specific)->check(CLI::PositiveNumber);
  t->add_option("--encoder-width", tr.encoder_width, "Tiny encoder output width")->check(CLI::PositiveNumber);

  EvalArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a dataset split");
  e->add_option("--data", ev.data)->required()->check(CLI::ExistingDirectory);
  e->add_option("--ckpt", ev.ckpt)->required()->check(CLI::ExistingFile);
  e->add_option("--vocab", ev.vocab, "Defaults to DATA/vocab.txt");
  e->add_option("--beam", ev.beam)->check(CLI::PositiveNumber);
  e->add_option("--max-len", ev.max_len)->check(CLI::PositiveNumber);
  e->add_option("--split", ev.split)->check(CLI::IsMember({"train", "valid", "test"}));
  e->add_option("--report", ev.report, "JSON report path")->required();
  e->add_option("--captions", ev.captions, "Also write per-example predictions");
  e->add_flag("--table", ev.table, "Print the metrics table");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Classify and caption inputs from a features/images file");
  g->add_option("--ckpt", gen.ckpt)->required()->check(CLI::ExistingFile);
  g->add_option("--features", gen.features)->required()->check(CLI::ExistingFile);
  g->add_option("--vocab", gen.vocab, "Defaults to vocab.txt next to the features file");
  g->add_option("--beam", gen.beam)->check(CLI::PositiveNumber);
  g->add_option("--max-len", gen.max_len)->check(CLI::PositiveNumber);
  g->add_flag("--greedy", gen.greedy, "Greedy decoding (same as --beam 1)");
  g->add_option("--out", gen.out, "Output file (default: stdout)");

  GradArgs grad;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every variant's gradients");
  gc->add_option("--seed", grad.seed);
  gc->add_option("--max-error", grad.max_error)->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (v->parsed()) return cmd_vocab(vocab, out);
    if (t->parsed()) {
      if (grid->count() > 0 && tr.tune_grid.empty()) tr.tune_grid = {0.25, 0.5, 1.0, 2.0};
      return cmd_train(tr, out);
    }
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (g->parsed()) return cmd_generate(gen, out);
    if (gc->parsed()) return cmd_grad_check(grad, out);
  } catch (const NumericError& ex) {
    err << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& ex) {
    err << "configuration error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ContractError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const Error& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace nair::cli
