#include "nair/oracles/naive.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nair::oracles {

std::vector<double> naive_matvec(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                 const std::vector<double>& x) {
  if (a.size() != rows * cols || x.size() != cols) throw std::invalid_argument("naive_matvec: size mismatch");
  std::vector<double> y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += a[r * cols + c] * x[c];
    y[r] = acc;
  }
  return y;
}

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n) {
  if (a.size() != m * k || b.size() != k * n) throw std::invalid_argument("naive_matmul: size mismatch");
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      out[i * n + j] = acc;
    }
  return out;
}

std::vector<double> naive_conv2d(const std::vector<double>& x, std::size_t c, std::size_t h, std::size_t w,
                                 const std::vector<double>& kernels, std::size_t o, std::size_t kh, std::size_t kw,
                                 std::size_t stride) {
  if (x.size() != c * h * w || kernels.size() != o * c * kh * kw || kh > h || kw > w || stride == 0)
    throw std::invalid_argument("naive_conv2d: bad shapes");
  const std::size_t oh = (h - kh) / stride + 1;
  const std::size_t ow = (w - kw) / stride + 1;
  std::vector<double> out(o * oh * ow, 0.0);
  for (std::size_t f = 0; f < o; ++f)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t z = 0; z < ow; ++z) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j)
              acc += kernels[((f * c + ch) * kh + i) * kw + j] * x[(ch * h + y * stride + i) * w + z * stride + j];
        out[(f * oh + y) * ow + z] = acc;
      }
  return out;
}

std::vector<double> naive_max_pool(const std::vector<double>& x, std::size_t c, std::size_t h, std::size_t w) {
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(c * oh * ow, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t z = 0; z < ow; ++z) {
        double m = x[(ch * h + 2 * y) * w + 2 * z];
        for (std::size_t i = 0; i < 2; ++i)
          for (std::size_t j = 0; j < 2; ++j) m = std::max(m, x[(ch * h + 2 * y + i) * w + 2 * z + j]);
        out[(ch * oh + y) * ow + z] = m;
      }
  return out;
}

double naive_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> naive_log_softmax(const std::vector<double>& logits) {
  double m = logits.at(0);
  for (double v : logits) m = std::max(m, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double lz = m + std::log(z);
  std::vector<double> out;
  for (double v : logits) out.push_back(v - lz);
  return out;
}

NaiveLstmState naive_lstm_step(const NaiveLstmState& state, const std::vector<double>& x,
                               const std::vector<double>& w_input, const std::vector<double>& w_hidden,
                               const std::vector<double>& bias) {
  const std::size_t hw = state.h.size();
  const auto a = naive_matvec(w_input, 4 * hw, x.size(), x);
  const auto b = naive_matvec(w_hidden, 4 * hw, hw, state.h);
  NaiveLstmState next{std::vector<double>(hw), std::vector<double>(hw)};
  for (std::size_t k = 0; k < hw; ++k) {
    const double i = naive_sigmoid(a[k] + b[k] + bias[k]);
    const double f = naive_sigmoid(a[hw + k] + b[hw + k] + bias[hw + k]);
    const double g = std::tanh(a[2 * hw + k] + b[2 * hw + k] + bias[2 * hw + k]);
    const double o = naive_sigmoid(a[3 * hw + k] + b[3 * hw + k] + bias[3 * hw + k]);
    next.c[k] = f * state.c[k] + i * g;
    next.h[k] = o * std::tanh(next.c[k]);
  }
  return next;
}

}  // namespace nair::oracles
