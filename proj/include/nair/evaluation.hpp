#pragma once

#include <span>
#include <string>
#include <vector>

#include "nair/dataset.hpp"
#include "nair/inference.hpp"
#include "nair/metrics.hpp"
#include "nair/model.hpp"

namespace nair {

// Decoded caption as space-separated tokens, END dropped.
std::string caption_text(const Caption& caption, const Vocabulary& vocab);

// Candidate = best decoded caption; references = the example's tokenized
// comments. `decoded`, when given, receives the captions.
std::vector<EvalPair> caption_corpus(const NairModel& model, std::span<const ReviewExample* const> examples,
                                     const Vocabulary& vocab, const DecodeOptions& options,
                                     std::vector<Caption>* decoded = nullptr);

// Accuracy for classifying variants, caption metrics for generating ones.
MetricReport evaluate_model(const NairModel& model, std::span<const ReviewExample* const> examples,
                            const Vocabulary& vocab, const DecodeOptions& options,
                            std::vector<Caption>* decoded = nullptr);

}  // namespace nair
