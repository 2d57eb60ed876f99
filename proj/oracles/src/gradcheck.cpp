#include "nair/oracles/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "nair/error.hpp"
#include "nair/layers.hpp"

namespace nair::oracles {

namespace {

double checked(const std::function<double()>& f) {
  NoTapeGuard guard;
  const double v = f();
  if (!std::isfinite(v)) throw NumericError("finite differences: f is not finite at a perturbed point");
  return v;
}

double central(const std::function<double()>& f, Tensor& t, std::size_t i, double step) {
  auto data = t.mutable_data();
  const double saved = data[i];
  data[i] = saved + step;
  const double plus = checked(f);
  data[i] = saved - step;
  const double minus = checked(f);
  data[i] = saved;
  return (plus - minus) / (2.0 * step);
}

// Central differences at step and step/2 differ by O(step^2) on smooth
// functions; a larger gap means a kink inside the window.
constexpr double kSmoothnessTolerance = 1e-5;

}  // namespace

std::vector<std::vector<double>> finite_diff_grad(const std::function<double()>& f, std::span<Tensor> params,
                                                  double step) {
  std::vector<std::vector<double>> out;
  for (Tensor& t : params) {
    std::vector<double> g(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) g[i] = central(f, t, i, step);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<double> finite_diff_at(const std::function<double()>& f, std::span<Tensor> params,
                                   std::span<const Coordinate> coords, double step) {
  std::vector<double> out;
  for (const Coordinate& c : coords) out.push_back(central(f, params[c.tensor], c.index, step));
  return out;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport model_gradient_check(Variant variant, std::uint64_t seed, const GradCheckOptions& options) {
  ModelConfig cfg = ModelConfig::defaults(variant, options.vocab_size);
  cfg.feature_width = options.feature_width;
  cfg.embed_width = options.embed_width;
  cfg.hidden_width = options.hidden_width;
  cfg.shared_width = options.feature_width;
  cfg.specific_width = std::max<std::size_t>(1, options.feature_width / 2);
  if (variant == Variant::kModelII) cfg.shared_width = cfg.specific_width;
  cfg.seed = seed;
  NairModel model(cfg);

  std::mt19937_64 rng(seed ^ 0x5deece66dULL);
  Instance inst;
  {
    const Shape shape = model.input_shape();
    const bool image = shape.size() == 3;
    inst.input = Tensor::uniform(shape, image ? 0.0 : -1.0, 1.0, rng);
  }
  inst.label = (rng() & 1u) ? Label::kHigh : Label::kLow;
  for (std::size_t t = 0; t < options.caption_length; ++t)
    inst.caption.push_back(token::kNumReserved + rng() % (options.vocab_size - token::kNumReserved));

  const std::uint64_t dropout_seed = rng();
  std::mt19937_64 dropout_rng;
  auto loss_fn = [&]() {
    dropout_rng.seed(dropout_seed);
    ForwardContext ctx{true, options.dropout_keep, &dropout_rng};
    return task_loss(model, inst, options.alpha, options.beta, ctx);
  };

  ParameterMap trainable = trainable_parameters(model);
  std::vector<std::string> names;
  std::vector<Tensor> params;
  for (auto& [name, p] : trainable) {
    names.push_back(name);
    params.push_back(p);
    params.back().zero_grad();
  }
  {
    Tape tape;
    Tensor loss = loss_fn();
    tape.backward(loss);
  }

  std::vector<Coordinate> coords;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const std::size_t n = params[k].size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (n > options.max_coords_per_tensor) {
      for (std::size_t i = 0; i < options.max_coords_per_tensor; ++i) {
        const std::size_t j = i + rng() % (n - i);
        std::swap(idx[i], idx[j]);
      }
      idx.resize(options.max_coords_per_tensor);
    }
    for (std::size_t i : idx) coords.push_back({k, i});
  }

  const std::function<double()> value = [&] { return loss_fn().item(); };
  GradCheckReport report;
  report.variant = variant;
  report.coordinates = coords.size();
  const double h = options.step;
  for (const Coordinate& c : coords) {
    Tensor& t = params[c.tensor];
    const double analytic = t.grad()[c.index];
    auto data = t.mutable_data();
    const double saved = data[c.index];
    auto at = [&](double dx) {
      data[c.index] = saved + dx;
      const double v = checked(value);
      data[c.index] = saved;
      return v;
    };
    const double plus = at(h), minus = at(-h);
    const double plus_half = at(h / 2), minus_half = at(-h / 2);
    const double central_h = (plus - minus) / (2.0 * h);
    const double central_half = (plus_half - minus_half) / h;
    double err = relative_error(analytic, central_h);
    if (relative_error(central_h, central_half) > kSmoothnessTolerance) {
      // At least one of these windows avoids the kink: the half-step central
      // difference, or a second-order one-sided stencil on the clean side.
      ++report.rough_windows;
      const double f0 = at(0.0);
      const double right = (4.0 * plus_half - plus - 3.0 * f0) / h;
      const double left = (3.0 * f0 - 4.0 * minus_half + minus) / h;
      err = std::min({err, relative_error(analytic, central_half), relative_error(analytic, right),
                      relative_error(analytic, left)});
    }
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_parameter = names[c.tensor] + "[" + std::to_string(c.index) + "]";
    }
  }
  for (Tensor& p : params) p.zero_grad();
  return report;
}

std::vector<GradCheckReport> gradient_check_suite(std::uint64_t seed, const GradCheckOptions& options) {
  std::vector<GradCheckReport> out;
  for (Variant v : {Variant::kIAC, Variant::kV2L, Variant::kMTBaseline, Variant::kModelI, Variant::kModelII})
    out.push_back(model_gradient_check(v, seed, options));
  return out;
}

}  // namespace nair::oracles
