#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace nair {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

// Dense row-major array of doubles. A Tensor is a cheap handle: copies share
// storage, clone() makes a deep copy. Operations on tensors that require a
// gradient are recorded on the thread's active Tape, if any.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                        bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return node_->data.size(); }
  bool is_scalar() const { return node_->data.size() == 1; }

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool value);

  // Zeros when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  // Deep copy of value; the copy starts without gradient.
  Tensor clone() const;
  // Same values, new storage, never requires grad.
  Tensor detach() const;

  bool shares_storage(const Tensor& other) const { return node_ == other.node_; }

  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of executed primitives. Constructing a Tape makes it the
// active tape for the current thread until it is destroyed (tapes nest).
// Only operations with at least one grad-requiring input are recorded, so the
// record is topologically ordered by construction.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  // Seeds d(loss)/d(loss) = 1 and replays the record in reverse. A loss that
  // does not depend on any grad-requiring tensor is a no-op.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }

  void record(const Tensor& output, BackwardFn fn);

 private:
  struct Entry {
    std::shared_ptr<detail::Node> output;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  Tape* previous_;
};

// Suspends recording for its lifetime (inference, oracle evaluation).
class NoTapeGuard {
 public:
  NoTapeGuard();
  ~NoTapeGuard();
  NoTapeGuard(const NoTapeGuard&) = delete;
  NoTapeGuard& operator=(const NoTapeGuard&) = delete;

 private:
  Tape* saved_;
};

enum class UnaryKind { kRelu, kSigmoid, kTanh };

// Matrix product. `b` may be rank 1, in which case it is treated as a column
// and the result is rank 1.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

Tensor unary(UnaryKind kind, const Tensor& x);
inline Tensor relu(const Tensor& x) { return unary(UnaryKind::kRelu, x); }
inline Tensor sigmoid(const Tensor& x) { return unary(UnaryKind::kSigmoid, x); }
inline Tensor tanh(const Tensor& x) { return unary(UnaryKind::kTanh, x); }

Tensor sum(const Tensor& x);
// Sum / arithmetic mean of a batch of scalar tensors.
Tensor sum(std::span<const Tensor> scalars);
Tensor mean(std::span<const Tensor> scalars);

// Concatenation along the last axis; leading dimensions must agree.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(const Tensor& a, const Tensor& b);
// Contiguous range [offset, offset + length) of a rank-1 tensor.
Tensor slice(const Tensor& x, std::size_t offset, std::size_t length);
Tensor reshape(const Tensor& x, Shape shape);
Tensor flatten(const Tensor& x);

Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);
// -log softmax(logits)[target] as a scalar.
Tensor cross_entropy(const Tensor& logits, std::size_t target);

// Row `index` of a rank-2 table.
Tensor embedding_lookup(const Tensor& table, std::size_t index);

// Inverted dropout: each element is kept with probability `keep` and scaled by
// 1 / keep. keep == 1 returns `x` itself.
Tensor dropout(const Tensor& x, double keep, std::mt19937_64& rng);
// Same, with an explicit 0/1 mask.
Tensor dropout_with_mask(const Tensor& x, double keep, std::span<const double> mask);

// Valid cross-correlation: x [c,h,w], kernels [f,c,kh,kw] -> [f,h',w'].
Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride = 1);
// x [c,h,w] plus one bias per channel.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);
// 2x2 window, stride 2, trailing odd row/column dropped. Ties go to the first
// element in row-major window order.
Tensor max_pool2x2(const Tensor& x);

// Uniform double in [0, 1) from 53 random bits; independent of the standard
// library's distribution implementations.
double uniform01(std::mt19937_64& rng);

}  // namespace nair
