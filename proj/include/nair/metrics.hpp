#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nair/types.hpp"

namespace nair {

using Sentence = std::vector<std::string>;

struct EvalPair {
  Sentence candidate;
  std::vector<Sentence> references;
};

// (TP + TN) / (P + N).
double overall_accuracy(std::span<const Label> predictions, std::span<const Label> labels);

// Corpus BLEU-n: clipped n-gram counts pooled over the corpus, uniform
// geometric mean over orders 1..n, brevity penalty against the closest
// reference length (ties to the shorter). No smoothing.
double bleu(std::span<const EvalPair> corpus, std::size_t n);

std::size_t lcs_length(const Sentence& a, const Sentence& b);
// Mean over pairs of the best LCS F-measure (beta = 1.2) across references.
double rouge_l(std::span<const EvalPair> corpus);

// Base CIDEr (no length penalty or count clipping): for n = 1..4, cosine of
// tf-idf n-gram vectors averaged over references, then over n, times 10.
// idf(g) = log(N / max(1, df(g))), df counted over per-image reference sets.
double cider(std::span<const EvalPair> corpus);

struct MeteorAlignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
// Exact-match unigram alignment with the most matches and, among those, the
// fewest chunks.
MeteorAlignment meteor_align(const Sentence& candidate, const Sentence& reference);
// F_mean = 10PR / (R + 9P), penalty = 0.5 (chunks / matches)^3, score =
// F_mean (1 - penalty); best reference per pair, mean over pairs.
// Exact-match only: no stemming or synonym modules.
double meteor_lite(std::span<const EvalPair> corpus);

struct MetricReport {
  std::string model;
  std::optional<double> overall_accuracy;
  std::optional<std::array<double, 4>> bleu;
  std::optional<double> rouge_l;
  std::optional<double> cider;
  std::optional<double> meteor_lite;
};

// Caption metrics over `corpus`; the corpus needs at least two images for
// CIDEr.
void fill_caption_metrics(MetricReport& report, std::span<const EvalPair> corpus);

// {"schema": 1, "model", "overall_accuracy", "bleu": [4], "rouge_l", "cider",
//  "meteor_lite"}; metrics that do not apply to the model are null.
nlohmann::ordered_json report_to_json(const MetricReport& report);
// Aligned text table, values in percent.
std::string report_to_table(const MetricReport& report);

}  // namespace nair
