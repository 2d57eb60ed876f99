#include "nair/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nair/error.hpp"

namespace nair {

namespace {

thread_local Tape* g_active_tape = nullptr;

using NodePtr = std::shared_ptr<detail::Node>;

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Records `fn` if a tape is active and some input needs a gradient.
template <typename Fn>
void track(Tensor& out, std::initializer_list<const Tensor*> inputs, Fn&& fn) {
  Tape* tape = Tape::active();
  if (tape == nullptr || !any_requires_grad(inputs)) return;
  out.node().requires_grad = true;
  tape->record(out, std::forward<Fn>(fn));
}

void accumulate(detail::Node& node, std::size_t i, double value) {
  node.grad[i] += value;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
}

void require_finite(std::span<const double> values, const char* op) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

double apply_unary(UnaryKind kind, double x) {
  switch (kind) {
    case UnaryKind::kRelu:
      return (x > 0.0 || std::isnan(x)) ? x : 0.0;  // NaN passes through
    case UnaryKind::kSigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      return std::exp(x) / (1.0 + std::exp(x));
    case UnaryKind::kTanh:
      return std::tanh(x);
  }
  return 0.0;
}

// Derivative expressed through input x and output y.
double unary_derivative(UnaryKind kind, double x, double y) {
  switch (kind) {
    case UnaryKind::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case UnaryKind::kSigmoid:
      return y * (1.0 - y);
    case UnaryKind::kTanh:
      return 1.0 - y * y;
  }
  return 0.0;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : Tensor(Shape{1}, std::vector<double>{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_to_string(shape));
  }
  if (shape.empty()) throw DimensionError("tensor rank must be at least 1");
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                       bool requires_grad) {
  std::vector<double> values(shape_size(shape));
  for (double& v : values) v = lo + (hi - lo) * uniform01(rng);
  return Tensor(std::move(shape), std::move(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (!is_scalar()) throw ContractError("item() on non-scalar " + shape_to_string(shape()));
  return node_->data[0];
}

Tensor& Tensor::set_requires_grad(bool value) {
  node_->requires_grad = value;
  return *this;
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::clone() const { return Tensor(shape(), node_->data, node_->requires_grad); }

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

// ---------------------------------------------------------------------------
// Tape

Tape::Tape() : previous_(g_active_tape) { g_active_tape = this; }

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(const Tensor& output, BackwardFn fn) {
  entries_.push_back(Entry{output.node_ptr(), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.is_scalar()) {
    throw ContractError("backward() needs a scalar loss, got " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  detail::Node& root = loss.node();
  root.ensure_grad();
  root.grad[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not upstream of the loss
    it->fn();
  }
}

NoTapeGuard::NoTapeGuard() : saved_(g_active_tape) { g_active_tape = nullptr; }

NoTapeGuard::~NoTapeGuard() { g_active_tape = saved_; }

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2)) {
    throw DimensionError("matmul: unsupported ranks " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t k = a.dim(1);
  const std::size_t n = b.rank() == 1 ? 1 : b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_to_string(a.shape()) +
                         " x " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  if (n == 1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* row = pa + i * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += row[p] * pb[p];
      out[i] = acc;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[i * k + p];
        const double* brow = pb + p * n;
        double* orow = out.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
      }
    }
  }
  Tensor result(b.rank() == 1 ? Shape{m} : Shape{m, n}, std::move(out));
  NodePtr na = a.node_ptr(), nb = b.node_ptr(), no = result.node_ptr();
  track(result, {&a, &b}, [na, nb, no, m, k, n] {
    const double* g = no->grad.data();
    if (na->requires_grad) {
      na->ensure_grad();
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * nb->data[p * n + j];
          na->grad[i * k + p] += acc;
        }
      }
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double av = na->data[i * k + p];
          for (std::size_t j = 0; j < n; ++j) nb->grad[p * n + j] += av * g[i * n + j];
        }
      }
    }
  });
  return result;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor result(a.shape(), std::move(out));
  NodePtr na = a.node_ptr(), nb = b.node_ptr(), no = result.node_ptr();
  track(result, {&a, &b}, [na, nb, no] {
    for (detail::Node* in : {na.get(), nb.get()}) {
      if (!in->requires_grad) continue;
      in->ensure_grad();
      for (std::size_t i = 0; i < no->grad.size(); ++i) accumulate(*in, i, no->grad[i]);
    }
  });
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor result(a.shape(), std::move(out));
  NodePtr na = a.node_ptr(), nb = b.node_ptr(), no = result.node_ptr();
  track(result, {&a, &b}, [na, nb, no] {
    if (na->requires_grad) {
      na->ensure_grad();
      for (std::size_t i = 0; i < no->grad.size(); ++i) na->grad[i] += no->grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (std::size_t i = 0; i < no->grad.size(); ++i) nb->grad[i] -= no->grad[i];
    }
  });
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor result(a.shape(), std::move(out));
  NodePtr na = a.node_ptr(), nb = b.node_ptr(), no = result.node_ptr();
  track(result, {&a, &b}, [na, nb, no] {
    if (na->requires_grad) {
      na->ensure_grad();
      for (std::size_t i = 0; i < no->grad.size(); ++i) na->grad[i] += no->grad[i] * nb->data[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (std::size_t i = 0; i < no->grad.size(); ++i) nb->grad[i] += no->grad[i] * na->data[i];
    }
  });
  return result;
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  Tensor result(a.shape(), std::move(out));
  NodePtr na = a.node_ptr(), no = result.node_ptr();
  track(result, {&a}, [na, no, factor] {
    na->ensure_grad();
    for (std::size_t i = 0; i < no->grad.size(); ++i) na->grad[i] += no->grad[i] * factor;
  });
  return result;
}

Tensor unary(UnaryKind kind, const Tensor& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply_unary(kind, x[i]);
  Tensor result(x.shape(), std::move(out));
  NodePtr nx = x.node_ptr(), no = result.node_ptr();
  track(result, {&x}, [nx, no, kind] {
    nx->ensure_grad();
    for (std::size_t i = 0; i < no->grad.size(); ++i) {
      nx->grad[i] += no->grad[i] * unary_derivative(kind, nx->data[i], no->data[i]);
    }
  });
  return result;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor result = Tensor::scalar(acc);
  NodePtr nx = x.node_ptr(), no = result.node_ptr();
  track(result, {&x}, [nx, no] {
    nx->ensure_grad();
    for (double& g : nx->grad) g += no->grad[0];
  });
  return result;
}

namespace {

// Weighted sum of scalars: factor * (s_0 + s_1 + ...).
Tensor reduce_scalars(std::span<const Tensor> scalars, bool average, const char* op) {
  if (scalars.empty()) throw ContractError(std::string(op) + ": empty batch");
  double acc = 0.0;
  bool needs_grad = false;
  for (const Tensor& s : scalars) {
    if (!s.is_scalar()) {
      throw DimensionError(std::string(op) + ": expected scalars, got " + shape_to_string(s.shape()));
    }
    acc += s.item();
    needs_grad = needs_grad || s.requires_grad();
  }
  const double factor = average ? 1.0 / static_cast<double>(scalars.size()) : 1.0;
  Tensor result = Tensor::scalar(average ? acc * factor : acc);
  Tape* tape = Tape::active();
  if (tape != nullptr && needs_grad) {
    std::vector<NodePtr> inputs;
    inputs.reserve(scalars.size());
    for (const Tensor& s : scalars) inputs.push_back(s.node_ptr());
    NodePtr no = result.node_ptr();
    result.node().requires_grad = true;
    tape->record(result, [inputs = std::move(inputs), no, factor] {
      for (const NodePtr& in : inputs) {
        if (!in->requires_grad) continue;
        in->ensure_grad();
        in->grad[0] += no->grad[0] * factor;
      }
    });
  }
  return result;
}

}  // namespace

Tensor sum(std::span<const Tensor> scalars) { return reduce_scalars(scalars, false, "sum"); }

Tensor mean(std::span<const Tensor> scalars) { return reduce_scalars(scalars, true, "mean"); }

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const std::size_t rank = first.size();
  std::size_t rows = 1;
  for (std::size_t i = 0; i + 1 < rank; ++i) rows *= first[i];
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool needs_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != rank || !std::equal(first.begin(), first.end() - 1, p.shape().begin())) {
      throw DimensionError("concat: incompatible shapes " + shape_to_string(first) + " and " +
                           shape_to_string(p.shape()));
    }
    widths.push_back(p.shape().back());
    total += p.shape().back();
    needs_grad = needs_grad || p.requires_grad();
  }
  std::vector<double> out(rows * total);
  std::size_t column = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].data().data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(src + r * widths[k], widths[k], out.data() + r * total + column);
    }
    column += widths[k];
  }
  Shape shape = first;
  shape.back() = total;
  Tensor result(std::move(shape), std::move(out));
  Tape* tape = Tape::active();
  if (tape != nullptr && needs_grad) {
    std::vector<NodePtr> inputs;
    for (const Tensor& p : parts) inputs.push_back(p.node_ptr());
    NodePtr no = result.node_ptr();
    result.node().requires_grad = true;
    tape->record(result, [inputs = std::move(inputs), widths, no, rows, total] {
      std::size_t col = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        detail::Node& in = *inputs[k];
        if (in.requires_grad) {
          in.ensure_grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < widths[k]; ++j) {
              in.grad[r * widths[k] + j] += no->grad[r * total + col + j];
            }
          }
        }
        col += widths[k];
      }
    });
  }
  return result;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  const Tensor parts[] = {a, b};
  return concat(parts);
}

Tensor slice(const Tensor& x, std::size_t offset, std::size_t length) {
  if (x.rank() != 1 || length == 0 || offset + length > x.size()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") invalid for " +
                         shape_to_string(x.shape()));
  }
  std::vector<double> out(x.data().begin() + offset, x.data().begin() + offset + length);
  Tensor result = Tensor::vector(std::move(out));
  NodePtr nx = x.node_ptr(), no = result.node_ptr();
  track(result, {&x}, [nx, no, offset, length] {
    nx->ensure_grad();
    for (std::size_t i = 0; i < length; ++i) nx->grad[offset + i] += no->grad[i];
  });
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                         shape_to_string(shape));
  }
  Tensor result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  NodePtr nx = x.node_ptr(), no = result.node_ptr();
  track(result, {&x}, [nx, no] {
    nx->ensure_grad();
    for (std::size_t i = 0; i < no->grad.size(); ++i) nx->grad[i] += no->grad[i];
  });
  return result;
}

Tensor flatten(const Tensor& x) { return reshape(x, Shape{x.size()}); }

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw DimensionError("softmax: expected rank 1, got " + shape_to_string(logits.shape()));
  require_finite(logits.data(), "softmax");
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (double& v : out) v /= total;
  Tensor result = Tensor::vector(std::move(out));
  NodePtr nx = logits.node_ptr(), no = result.node_ptr();
  track(result, {&logits}, [nx, no] {
    nx->ensure_grad();
    double dot = 0.0;
    for (std::size_t i = 0; i < no->grad.size(); ++i) dot += no->grad[i] * no->data[i];
    for (std::size_t i = 0; i < no->grad.size(); ++i) {
      nx->grad[i] += no->data[i] * (no->grad[i] - dot);
    }
  });
  return result;
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.rank() != 1) throw DimensionError("log_softmax: expected rank 1, got " + shape_to_string(logits.shape()));
  require_finite(logits.data(), "log_softmax");
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  double total = 0.0;
  for (double v : logits.data()) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - log_norm;
  Tensor result = Tensor::vector(std::move(out));
  NodePtr nx = logits.node_ptr(), no = result.node_ptr();
  track(result, {&logits}, [nx, no] {
    nx->ensure_grad();
    double gsum = 0.0;
    for (double g : no->grad) gsum += g;
    for (std::size_t i = 0; i < no->grad.size(); ++i) {
      nx->grad[i] += no->grad[i] - std::exp(no->data[i]) * gsum;
    }
  });
  return result;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  if (logits.rank() != 1) throw DimensionError("cross_entropy: expected rank 1, got " + shape_to_string(logits.shape()));
  if (target >= logits.size()) {
    throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                     std::to_string(logits.size()) + " classes");
  }
  require_finite(logits.data(), "cross_entropy");
  const double peak = *std::max_element(logits.data().begin(), logits.data().end());
  double total = 0.0;
  for (double v : logits.data()) total += std::exp(v - peak);
  const double log_norm = peak + std::log(total);
  Tensor result = Tensor::scalar(log_norm - logits[target]);
  NodePtr nx = logits.node_ptr(), no = result.node_ptr();
  track(result, {&logits}, [nx, no, target, log_norm] {
    nx->ensure_grad();
    const double g = no->grad[0];
    for (std::size_t i = 0; i < nx->data.size(); ++i) {
      const double p = std::exp(nx->data[i] - log_norm);
      nx->grad[i] += g * (p - (i == target ? 1.0 : 0.0));
    }
  });
  return result;
}

Tensor embedding_lookup(const Tensor& table, std::size_t index) {
  if (table.rank() != 2) throw DimensionError("embedding_lookup: table must be rank 2, got " + shape_to_string(table.shape()));
  const std::size_t rows = table.dim(0);
  const std::size_t width = table.dim(1);
  if (index >= rows) {
    throw IndexError("embedding_lookup: id " + std::to_string(index) + " out of range for " +
                     std::to_string(rows) + " rows");
  }
  auto begin = table.data().begin() + index * width;
  Tensor result = Tensor::vector(std::vector<double>(begin, begin + width));
  NodePtr nt = table.node_ptr(), no = result.node_ptr();
  track(result, {&table}, [nt, no, index, width] {
    nt->ensure_grad();
    for (std::size_t j = 0; j < width; ++j) nt->grad[index * width + j] += no->grad[j];
  });
  return result;
}

Tensor dropout_with_mask(const Tensor& x, double keep, std::span<const double> mask) {
  if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("dropout: keep probability must be in (0, 1]");
  if (mask.size() != x.size()) throw DimensionError("dropout: mask size mismatch");
  std::vector<double> factors(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) factors[i] = mask[i] / keep;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factors[i];
  Tensor result(x.shape(), std::move(out));
  NodePtr nx = x.node_ptr(), no = result.node_ptr();
  track(result, {&x}, [nx, no, factors = std::move(factors)] {
    nx->ensure_grad();
    for (std::size_t i = 0; i < factors.size(); ++i) nx->grad[i] += no->grad[i] * factors[i];
  });
  return result;
}

Tensor dropout(const Tensor& x, double keep, std::mt19937_64& rng) {
  if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("dropout: keep probability must be in (0, 1]");
  if (keep == 1.0) return x;
  std::vector<double> mask(x.size());
  for (double& m : mask) m = uniform01(rng) < keep ? 1.0 : 0.0;
  return dropout_with_mask(x, keep, mask);
}

Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride) {
  if (x.rank() != 3 || kernels.rank() != 4) {
    throw DimensionError("conv2d: expected [c,h,w] and [f,c,kh,kw], got " +
                         shape_to_string(x.shape()) + " and " + shape_to_string(kernels.shape()));
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be positive");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t f = kernels.dim(0), kh = kernels.dim(2), kw = kernels.dim(3);
  if (kernels.dim(1) != c) {
    throw DimensionError("conv2d: channel mismatch " + shape_to_string(x.shape()) + " vs " +
                         shape_to_string(kernels.shape()));
  }
  if (kh > h || kw > w) {
    throw DimensionError("conv2d: kernel " + shape_to_string(kernels.shape()) +
                         " larger than input " + shape_to_string(x.shape()));
  }
  if ((h - kh) % stride != 0 || (w - kw) % stride != 0) {
    throw ConfigError("conv2d: stride " + std::to_string(stride) +
                      " does not tile input " + shape_to_string(x.shape()));
  }
  const std::size_t oh = (h - kh) / stride + 1;
  const std::size_t ow = (w - kw) / stride + 1;
  std::vector<double> out(f * oh * ow, 0.0);
  const double* px = x.data().data();
  const double* pk = kernels.data().data();
  for (std::size_t o = 0; o < f; ++o) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double kv = pk[((o * c + ch) * kh + a) * kw + b];
          for (std::size_t i = 0; i < oh; ++i) {
            const double* xrow = px + (ch * h + i * stride + a) * w + b;
            double* orow = out.data() + (o * oh + i) * ow;
            for (std::size_t j = 0; j < ow; ++j) orow[j] += kv * xrow[j * stride];
          }
        }
      }
    }
  }
  Tensor result(Shape{f, oh, ow}, std::move(out));
  NodePtr nx = x.node_ptr(), nk = kernels.node_ptr(), no = result.node_ptr();
  track(result, {&x, &kernels}, [=] {
    const double* g = no->grad.data();
    if (nx->requires_grad) nx->ensure_grad();
    if (nk->requires_grad) nk->ensure_grad();
    for (std::size_t o = 0; o < f; ++o) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t a = 0; a < kh; ++a) {
          for (std::size_t b = 0; b < kw; ++b) {
            const std::size_t kidx = ((o * c + ch) * kh + a) * kw + b;
            double kacc = 0.0;
            for (std::size_t i = 0; i < oh; ++i) {
              const std::size_t xbase = (ch * h + i * stride + a) * w + b;
              const double* grow = g + (o * oh + i) * ow;
              for (std::size_t j = 0; j < ow; ++j) {
                kacc += grow[j] * nx->data[xbase + j * stride];
                if (nx->requires_grad) nx->grad[xbase + j * stride] += grow[j] * nk->data[kidx];
              }
            }
            if (nk->requires_grad) nk->grad[kidx] += kacc;
          }
        }
      }
    }
  });
  return result;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() != 3 || bias.rank() != 1 || bias.size() != x.dim(0)) {
    throw DimensionError("add_channel_bias: " + shape_to_string(x.shape()) + " with bias " +
                         shape_to_string(bias.shape()));
  }
  const std::size_t c = x.dim(0);
  const std::size_t plane = x.dim(1) * x.dim(2);
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) out[ch * plane + i] += bias[ch];
  }
  Tensor result(x.shape(), std::move(out));
  NodePtr nx = x.node_ptr(), nb = bias.node_ptr(), no = result.node_ptr();
  track(result, {&x, &bias}, [nx, nb, no, c, plane] {
    if (nx->requires_grad) {
      nx->ensure_grad();
      for (std::size_t i = 0; i < no->grad.size(); ++i) nx->grad[i] += no->grad[i];
    }
    if (nb->requires_grad) {
      nb->ensure_grad();
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += no->grad[ch * plane + i];
        nb->grad[ch] += acc;
      }
    }
  });
  return result;
}

Tensor max_pool2x2(const Tensor& x) {
  if (x.rank() != 3 || x.dim(1) < 2 || x.dim(2) < 2) {
    throw DimensionError("max_pool2x2: expected [c,h,w] with h,w >= 2, got " + shape_to_string(x.shape()));
  }
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<double> out(c * oh * ow);
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = (ch * h + 2 * i) * w + 2 * j;
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t idx = (ch * h + 2 * i + a) * w + 2 * j + b;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (ch * oh + i) * ow + j;
        out[o] = x[best];
        argmax[o] = best;
      }
    }
  }
  Tensor result(Shape{c, oh, ow}, std::move(out));
  NodePtr nx = x.node_ptr(), no = result.node_ptr();
  track(result, {&x}, [nx, no, argmax = std::move(argmax)] {
    nx->ensure_grad();
    for (std::size_t o = 0; o < argmax.size(); ++o) nx->grad[argmax[o]] += no->grad[o];
  });
  return result;
}

}  // namespace nair
