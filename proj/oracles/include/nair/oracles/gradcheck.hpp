#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nair/model.hpp"
#include "nair/tensor.hpp"

namespace nair::oracles {

inline constexpr double kDefaultFdStep = 1e-5;

// Central differences of f with respect to every coordinate of `params`.
// Perturbs the tensors in place and restores them. Throws NumericError when
// f is non-finite at a perturbed point.
std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& f, std::span<Tensor> params,
                                                  double step = kDefaultFdStep);

struct Coordinate {
  std::size_t tensor = 0;
  std::size_t index = 0;
};
std::vector<double> finite_diff_at(const std::function<double()>& f, std::span<Tensor> params,
                                   std::span<const Coordinate> coords, double step = kDefaultFdStep);

// |a - n| / max(|a|, |n|, floor). The floor keeps f64 roundoff in the
// difference quotient (about eps * |f| / step, ~1e-10 here) from dominating
// on gradients near zero.
inline constexpr double kRelativeErrorFloor = 1e-5;
double relative_error(double analytic, double numeric, double floor = kRelativeErrorFloor);

struct GradCheckReport {
  Variant variant = Variant::kIAC;
  std::size_t coordinates = 0;
  // Coordinates where the central differences at step and step/2 disagree:
  // a ReLU or max-pool switch inside the window, or roundoff on a gradient
  // near zero. These are also compared against the half-step and one-sided
  // estimates, and the closest one counts.
  std::size_t rough_windows = 0;
  double max_relative_error = 0.0;
  std::string worst_parameter;
};

struct GradCheckOptions {
  std::size_t feature_width = 8;
  std::size_t embed_width = 8;
  std::size_t hidden_width = 8;
  std::size_t vocab_size = 10;
  std::size_t caption_length = 3;
  // Larger tensors are checked on this many seeded coordinates.
  std::size_t max_coords_per_tensor = 48;
  double dropout_keep = 0.8;  // fixed masks, replayed identically per evaluation
  double alpha = 0.7;
  double beta = 1.3;
  double step = kDefaultFdStep;
};

// Backward through the task loss of one tiny model vs central differences.
GradCheckReport model_gradient_check(Variant variant, std::uint64_t seed, const GradCheckOptions& options = {});
std::vector<GradCheckReport> gradient_check_suite(std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace nair::oracles
