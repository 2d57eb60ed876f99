#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nair/model.hpp"
#include "nair/types.hpp"

namespace nair {

struct ClassPrediction {
  Label label = Label::kLow;
  double probability = 0.0;  // softmax probability of `label`
};

// Argmax of the two-way softmax; exactly equal logits resolve to Low.
ClassPrediction predict_class(const NairModel& model, const Tensor& input);
std::vector<ClassPrediction> predict_class(const NairModel& model, std::span<const Tensor> inputs);
ClassPrediction prediction_from_logits(std::span<const double> logits);

struct DecodeOptions {
  std::size_t beam_size = 20;
  std::size_t max_len = 30;  // tokens emitted, END included
  std::size_t end_token = token::kEnd;
  // Never emitted.
  std::vector<std::size_t> banned_tokens = {token::kPad, token::kStart};
  // Rank the final pool by log prob / length instead of raw log prob.
  bool length_normalize = false;
};

struct Hypothesis {
  std::vector<std::size_t> tokens;
  double log_prob = 0.0;
  DecoderState state;
  bool finished = false;
};

struct Caption {
  std::vector<std::size_t> tokens;  // ends in END unless truncated at max_len
  double log_prob = 0.0;
};

// Length-synchronous beam search from the image step. Returns every retired
// hypothesis, best first: log prob descending, then shorter, then
// lexicographically smaller ids.
std::vector<Caption> beam_search(const NairModel& model, const Tensor& input,
                                 const DecodeOptions& options = {});
std::vector<Caption> beam_search_from_representation(const NairModel& model, const Tensor& rep_gen,
                                                     const DecodeOptions& options);

// Argmax token at every step (ties to the lowest id); beam_size is ignored.
Caption greedy_decode(const NairModel& model, const Tensor& input, const DecodeOptions& options = {});

// Best caption for each input; beam_size 1 uses greedy decoding.
std::vector<Caption> decode_batch(const NairModel& model, std::span<const Tensor> inputs,
                                  const DecodeOptions& options);

// Tokens without a trailing END.
std::vector<std::size_t> strip_end(const Caption& caption, std::size_t end_token = token::kEnd);

}  // namespace nair
