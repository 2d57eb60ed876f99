#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "nair/model.hpp"
#include "nair/tensor.hpp"

namespace nair::oracles {

// Hard enumeration bounds.
inline constexpr std::size_t kMaxEnumVocab = 8;
inline constexpr std::size_t kMaxEnumLength = 4;

// log p(next | prefix) over the whole vocabulary.
using NextLogProbs = std::function<std::vector<double>(const std::vector<std::size_t>& prefix)>;

struct EnumeratedSequence {
  std::vector<std::size_t> tokens;
  double log_prob = 0.0;
  bool finished = false;  // ended in END rather than hitting max_len
};

// Every token sequence that either ends in `end_token` or reaches max_len,
// skipping `banned` tokens. Exact log probs.
std::vector<EnumeratedSequence> enumerate_sequences(const NextLogProbs& next, std::size_t vocab_size,
                                                    std::size_t max_len, std::size_t end_token,
                                                    const std::vector<std::size_t>& banned = {});

// Same tree over a model's decoder, scored by the reference forward pass.
std::vector<EnumeratedSequence> enumerate_sequences(const NairModel& model, const Tensor& input,
                                                    std::size_t max_len,
                                                    const std::vector<std::size_t>& banned = {});

// Highest log prob; ties to the shorter, then lexicographically smaller one.
const EnumeratedSequence& best_sequence(const std::vector<EnumeratedSequence>& all);

}  // namespace nair::oracles
