#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nair/model.hpp"
#include "nair/types.hpp"

namespace nair::oracles {

// Forward pass of a NairModel recomputed from its raw parameter buffers with
// the loops in naive.hpp. Inference only (no dropout).

std::vector<double> reference_features(const NairModel& model, const std::vector<double>& input);

struct ReferenceRepresentation {
  std::vector<double> cls;
  std::vector<double> gen;
};
ReferenceRepresentation reference_representation(const NairModel& model, const std::vector<double>& v);

std::vector<double> reference_class_logits(const NairModel& model, const std::vector<double>& rep_cls);

class ReferenceDecoder {
 public:
  ReferenceDecoder(const NairModel& model, const std::vector<double>& rep_gen);

  // Feeds `token`, returns log p(. | history).
  std::vector<double> next_log_probs(std::size_t token);

 private:
  const NairModel& model_;
  std::vector<std::vector<double>> h_, c_;

  std::vector<double> feed(std::vector<double> x);
};

// Log prob of `tokens` (fed after START) given an image input.
double reference_caption_log_prob(const NairModel& model, const std::vector<double>& input,
                                  std::span<const std::size_t> tokens);

// alpha * CE(class) + beta * sum of step CEs for multi-task variants; the
// single task loss otherwise.
double reference_task_loss(const NairModel& model, const std::vector<double>& input, Label label,
                           std::span<const std::size_t> caption, double alpha, double beta);

}  // namespace nair::oracles
