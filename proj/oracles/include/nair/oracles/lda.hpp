#pragma once

#include <span>
#include <vector>

#include "nair/types.hpp"

namespace nair::oracles {

struct LdaProbe {
  double train_accuracy = 0.0;
  // Squared distance between class means along w, over pooled projected variance.
  double fisher_ratio = 0.0;
};

// Two-class Fisher discriminant, w = (S_w + ridge I)^-1 (mu_high - mu_low),
// thresholded halfway between the projected means.
LdaProbe lda_probe(std::span<const std::vector<double>> features, std::span<const Label> labels,
                   double ridge = 1e-3);

}  // namespace nair::oracles
