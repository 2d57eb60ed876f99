// Acceptance harness: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "nair/cli.hpp"
#include "nair/dataset.hpp"
#include "nair/inference.hpp"
#include "nair/io.hpp"
#include "nair/metrics.hpp"
#include "nair/model.hpp"
#include "nair/oracles/enumerate.hpp"
#include "nair/oracles/gradcheck.hpp"
#include "nair/oracles/metric_oracles.hpp"
#include "nair/trainer.hpp"

using namespace nair;
using nair::test::TempDir;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Analytic vs central-difference gradients on every variant.
Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  oracles::GradCheckOptions opts;
  opts.feature_width = 8;
  opts.embed_width = 8;
  opts.hidden_width = 8;
  opts.vocab_size = 10;
  const auto reports = oracles::gradient_check_suite(7, opts);
  double worst = 0.0;
  std::size_t coords = 0;
  for (const auto& r : reports) {
    worst = std::max(worst, r.max_relative_error);
    coords += r.coordinates;
  }
  const double secs = seconds_since(t0);
  return {reports.size() == 5 && worst <= 1e-4 && secs < 30.0,
          std::to_string(reports.size()) + " variants, " + std::to_string(coords) + " coordinates, max rel err " +
              fmt("%.2e", worst) + ", " + fmt("%.1f", secs) + "s (limit 30s)"};
}

// 2. Model-I and Model-II memorize the 8 training images of a seeded set.
Outcome overfit_memorization() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.seed = 1;
  sc.n_images = 10;  // 8 train / 1 valid / 1 test
  sc.feature_dim = 64;
  sc.comments_per_image = 1;
  const Dataset ds = synth_dataset(sc);
  const Vocabulary vocab = Vocabulary::build(ds.corpus(Split::kTrain), 1);
  const auto train_examples = ds.split(Split::kTrain);

  TrainConfig tc;
  tc.learning_rate = 0.1;
  tc.batch_size = 8;
  tc.dropout_keep = 1.0;
  tc.seed = 1;
  const auto instances = make_instances(ds, Split::kTrain, vocab, tc.max_caption_length, 1);

  std::string detail = std::to_string(train_examples.size()) + " train images;";
  bool pass = train_examples.size() == 8 && instances.size() == 8;
  for (Variant v : {Variant::kModelI, Variant::kModelII}) {
    ModelConfig mc = ModelConfig::defaults(v, vocab.size());
    mc.feature_width = sc.feature_dim;
    mc.embed_width = 64;
    mc.hidden_width = 64;
    mc.shared_width = v == Variant::kModelII ? 32 : 64;
    mc.specific_width = 32;
    mc.seed = 1;
    NairModel model(mc);
    std::mt19937_64 rng(tc.seed);
    DecodeOptions greedy;
    greedy.beam_size = 1;
    greedy.max_len = tc.max_caption_length + 1;

    std::size_t reached = 0;
    for (std::size_t step = 1; step <= 2000 && reached == 0; ++step) {
      sgd_step(model, instances, tc, rng);
      if (step % 10 != 0 && step != 2000) continue;
      bool ok = evaluate_accuracy(model, train_examples).value_or(0.0) == 1.0;
      for (std::size_t i = 0; ok && i < instances.size(); ++i)
        ok = strip_end(greedy_decode(model, instances[i].input, greedy)) == instances[i].caption;
      if (ok) reached = step;
    }
    pass = pass && reached != 0;
    detail += " " + std::string(variant_name(v)) + (reached ? " at step " + std::to_string(reached) : " not reached");
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 60.0;
  return {pass, detail + ", " + fmt("%.1f", secs) + "s (limit 60s)"};
}

// 3. Beam search with a beam covering every sequence equals enumeration.
Outcome beam_optimality() {
  std::size_t match = 0, models = 0;
  double worst = 0.0;
  auto toy = [](std::size_t vocab, std::uint64_t seed) {
    ModelConfig cfg = test::tiny_config(Variant::kV2L, vocab, 6, seed);
    cfg.embed_width = 5;
    cfg.hidden_width = 5;
    cfg.init_range = 1.5;
    return NairModel(cfg);
  };
  std::mt19937_64 rng(11);
  for (std::size_t i = 0; i < 20; ++i, ++models) {
    const std::size_t vocab = 4 + i % 3;
    const std::size_t max_len = 1 + (i / 3) % 3;
    const NairModel m = toy(vocab, 3000 + i);
    const Tensor x = test::random_tensor(m.input_shape(), rng);
    DecodeOptions opts;
    opts.beam_size = static_cast<std::size_t>(std::pow(vocab, max_len));
    opts.max_len = max_len;
    const auto beams = beam_search(m, x, opts);
    const auto all = oracles::enumerate_sequences(m, x, max_len, opts.banned_tokens);
    const auto& best = oracles::best_sequence(all);
    if (beams.empty()) continue;
    const double err = std::abs(beams.front().log_prob - best.log_prob);
    worst = std::max(worst, err);
    if (beams.front().tokens == best.tokens && err <= 1e-10) ++match;
  }

  std::size_t same = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    const NairModel m = toy(4 + i % 3, 4000 + i);
    const Tensor x = test::random_tensor(m.input_shape(), rng);
    DecodeOptions opts;
    opts.beam_size = 1;
    opts.max_len = 1 + i % 5;
    const auto beams = beam_search(m, x, opts);
    if (!beams.empty() && beams.front().tokens == greedy_decode(m, x, opts).tokens) ++same;
  }
  return {match == models && models == 20 && same == 50,
          std::to_string(match) + "/" + std::to_string(models) + " toy models match enumeration (max |dlogp| " +
              fmt("%.1e", worst) + "), beam 1 == greedy on " + std::to_string(same) + "/50"};
}

// 4. Metrics vs their direct-formula oracles.
Outcome metric_oracles() {
  std::mt19937_64 rng(21);
  double worst = 0.0;
  for (int c = 0; c < 50; ++c) {
    const auto corpus = test::random_corpus(rng);
    for (std::size_t n = 1; n <= 4; ++n)
      worst = std::max(worst, std::abs(bleu(corpus, n) - oracles::oracle_bleu(corpus, n)));
    worst = std::max(worst, std::abs(rouge_l(corpus) - oracles::oracle_rouge_l(corpus)));
    worst = std::max(worst, std::abs(cider(corpus) - oracles::oracle_cider(corpus)));
    worst = std::max(worst, std::abs(meteor_lite(corpus) - oracles::oracle_meteor_lite(corpus)));
  }
  std::size_t exact = 0;
  for (int a = 0; a < 100; ++a) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<Label> p(n), l(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = rng() % 2 ? Label::kHigh : Label::kLow;
      l[i] = rng() % 2 ? Label::kHigh : Label::kLow;
      hits += p[i] == l[i];
    }
    if (overall_accuracy(p, l) == static_cast<double>(hits) / static_cast<double>(n)) ++exact;
  }
  return {worst <= 1e-10 && exact == 100,
          "50 corpora, max |metric - oracle| " + fmt("%.1e", worst) + "; accuracy exact on " + std::to_string(exact) +
              "/100 arrays"};
}

// 5. Score thresholds at delta 0.5.
Outcome labeling_rule() {
  std::size_t wrong = 0, checked = 0;
  for (double s : {3.4, 3.7, 4.2}) wrong += label_from_score(s) != LabelDecision::kLow, ++checked;
  for (double s : {5.5, 5.6, 5.9, 6.08, 6.1}) wrong += label_from_score(s) != LabelDecision::kHigh, ++checked;
  for (int i = 0; i < 1000; ++i) {
    const double s = 4.5 + i * 0.001;
    wrong += label_from_score(s) != LabelDecision::kDiscard, ++checked;
  }
  wrong += label_from_score(std::nextafter(5.5, 0.0)) != LabelDecision::kDiscard, ++checked;
  wrong += label_from_score(std::nextafter(4.5, 0.0)) != LabelDecision::kLow, ++checked;
  return {wrong == 0, std::to_string(checked - wrong) + "/" + std::to_string(checked) + " scores classified as expected"};
}

// 6. Frozen features stay put under Model-I/II; the MT baseline moves its convs.
Outcome frozen_contract() {
  SynthConfig sc;
  sc.seed = 4;
  sc.n_images = 20;
  sc.feature_dim = 16;
  const Dataset feats = synth_dataset(sc);
  const Vocabulary vocab = Vocabulary::build(feats.corpus(Split::kTrain), 1);
  std::vector<std::vector<double>> before;
  for (const auto& ex : feats.examples) before.push_back(test::to_vec(ex.input));

  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 16;
  tc.seed = 4;
  bool pass = true;
  std::size_t encoder_params = 0;
  for (Variant v : {Variant::kModelI, Variant::kModelII}) {
    const NairModel m(test::tiny_config(v, vocab.size(), sc.feature_dim, 4));
    for (const auto& [name, p] : m.parameters()) encoder_params += is_encoder_parameter(name);
    const TrainResult r = train(m, feats, vocab, tc);
    pass = pass && !r.log.empty();
  }
  std::size_t moved_features = 0;
  for (std::size_t i = 0; i < before.size(); ++i) moved_features += test::to_vec(feats.examples[i].input) != before[i];
  pass = pass && moved_features == 0 && encoder_params == 0;

  sc.modality = Modality::kImages;
  const Dataset images = synth_dataset(sc);
  const Vocabulary ivocab = Vocabulary::build(images.corpus(Split::kTrain), 1);
  ModelConfig mc = ModelConfig::defaults(Variant::kMTBaseline, ivocab.size());
  mc.feature_width = 16;
  mc.embed_width = 16;
  mc.hidden_width = 16;
  mc.seed = 4;
  const NairModel mt(mc);
  const NairModel mt_initial = mt.clone();
  const TrainResult r = train(mt, images, ivocab, tc);
  std::size_t kernels = 0, moved_kernels = 0;
  for (const auto& [name, p] : r.final_model.parameters()) {
    if (!is_encoder_parameter(name) || name.find("conv") == std::string::npos || p.rank() != 4) continue;
    ++kernels;
    moved_kernels += test::to_vec(p) != test::to_vec(mt_initial.parameters().at(name));
  }
  pass = pass && kernels > 0 && moved_kernels >= 1;
  return {pass, std::to_string(before.size()) + " feature vectors, " + std::to_string(moved_features) +
                    " changed, " + std::to_string(encoder_params) + " encoder parameters in Model-I/II; MT baseline " +
                    std::to_string(moved_kernels) + "/" + std::to_string(kernels) + " conv kernels changed"};
}

// 7. Published representation widths.
Outcome architecture_widths() {
  std::mt19937_64 rng(5);
  const NairModel m1(ModelConfig::defaults(Variant::kModelI, 12));
  const NairModel m2(ModelConfig::defaults(Variant::kModelII, 12));
  const Tensor v1 = test::random_tensor(m1.input_shape(), rng);
  const Representation r1 = representation(m1, v1);
  const Representation r2 = representation(m2, test::random_tensor(m2.input_shape(), rng));
  const auto& c2 = m2.config();
  const bool pass = m1.config().shared_width == 512 && r1.cls.size() == 512 && r1.gen.size() == 512 &&
                    c2.specific_width == 256 && c2.shared_width == 256 && r2.cls.size() == 512 &&
                    r2.gen.size() == 512 && m2.rep_cls_width() == 512 && m2.rep_gen_width() == 512;
  return {pass, "Model-I cls/gen " + std::to_string(r1.cls.size()) + "/" + std::to_string(r1.gen.size()) +
                    "; Model-II cls/gen " + std::to_string(r2.cls.size()) + "/" + std::to_string(r2.gen.size()) + " = " +
                    std::to_string(c2.specific_width) + " specific + " + std::to_string(c2.shared_width) + " shared"};
}

// 8. Seeded command pipeline is byte-reproducible.
Outcome determinism() {
  auto pipeline = [](const TempDir& dir) {
    std::ostringstream out, err;
    const std::string d = dir.path().string();
    const std::vector<std::vector<std::string>> commands{
        {"synth-data", "--seed", "9", "--n-images", "20", "--feature-dim", "16", "--out", d},
        {"build-vocab", "--data", d, "--min-count", "1"},
        {"train", "--data", d, "--variant", "model2", "--epochs", "3", "--seed", "9", "--batch-size", "16", "--embed",
         "16", "--hidden", "16", "--shared", "8", "--specific", "8", "--out", (dir / "m.ckpt").string()},
        {"evaluate", "--data", d, "--ckpt", (dir / "m.ckpt").string(), "--beam", "3", "--report",
         (dir / "report.json").string()},
    };
    for (const auto& c : commands)
      if (cli::run(c, out, err) != 0) return false;
    return true;
  };
  TempDir a, b;
  if (!pipeline(a) || !pipeline(b)) return {false, "pipeline command failed"};
  std::size_t same = 0, files = 0;
  for (std::string f : {"manifest.jsonl", "features.bin", "vocab.txt", "m.ckpt", "report.json"}) {
    ++files;
    same += io::read_file(a / f) == io::read_file(b / f);
  }
  return {same == files, std::to_string(same) + "/" + std::to_string(files) +
                             " artifacts byte-identical (data, vocab, checkpoint, report)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"overfit memorization", overfit_memorization},
      {"beam search optimality", beam_optimality},
      {"metric oracle equivalence", metric_oracles},
      {"labeling rule", labeling_rule},
      {"frozen-weight contract", frozen_contract},
      {"architecture widths", architecture_widths},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed;
}
