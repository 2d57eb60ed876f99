#pragma once

#include <cstddef>
#include <vector>

namespace nair::oracles {

// Plain loops over row-major buffers. Nothing here calls into the main
// tensor kernels.

// y[r] = sum_c a[r * cols + c] * x[c]
std::vector<double> naive_matvec(const std::vector<double>& a, std::size_t rows, std::size_t cols,
                                 const std::vector<double>& x);
// [m, k] x [k, n]
std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n);

// Valid cross-correlation of x [c, h, w] with kernels [o, c, kh, kw].
std::vector<double> naive_conv2d(const std::vector<double>& x, std::size_t c, std::size_t h, std::size_t w,
                                 const std::vector<double>& kernels, std::size_t o, std::size_t kh, std::size_t kw,
                                 std::size_t stride = 1);
// 2x2 stride-2 max pool with floor semantics over [c, h, w].
std::vector<double> naive_max_pool(const std::vector<double>& x, std::size_t c, std::size_t h, std::size_t w);

double naive_sigmoid(double x);
std::vector<double> naive_log_softmax(const std::vector<double>& logits);

struct NaiveLstmState {
  std::vector<double> h;
  std::vector<double> c;
};

// One step with gates stacked (i, f, g, o) in w_input [4h, in], w_hidden
// [4h, h], bias [4h].
NaiveLstmState naive_lstm_step(const NaiveLstmState& state, const std::vector<double>& x,
                               const std::vector<double>& w_input, const std::vector<double>& w_hidden,
                               const std::vector<double>& bias);

}  // namespace nair::oracles
