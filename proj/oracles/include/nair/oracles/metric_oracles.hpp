#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nair/metrics.hpp"
#include "nair/types.hpp"

namespace nair::oracles {

// Direct transcriptions of each formula, written without reusing any helper
// from the metrics module.

double oracle_accuracy(std::span<const Label> predictions, std::span<const Label> labels);
double oracle_bleu(std::span<const EvalPair> corpus, std::size_t n);
double oracle_rouge_l(std::span<const EvalPair> corpus);
double oracle_cider(std::span<const EvalPair> corpus);

// Tries every injective exact-match alignment. Exponential; keep sentences
// short (<= 10 tokens).
MeteorAlignment oracle_meteor_align(const Sentence& candidate, const Sentence& reference);
double oracle_meteor_lite(std::span<const EvalPair> corpus);

}  // namespace nair::oracles
