#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nair/tensor.hpp"

namespace nair {

// Parameters by unique dotted name; std::map keeps them in lexicographic order,
// which is also the checkpoint order.
using ParameterMap = std::map<std::string, Tensor>;

// Uniform(-range, range) initializer shared by every layer of a model.
struct ParamInit {
  std::mt19937_64& rng;
  double range = 0.08;

  Tensor make(Shape shape) const;
};

// Inference-vs-training switches threaded through forward passes.
struct ForwardContext {
  bool train = false;
  double dropout_keep = 1.0;
  std::mt19937_64* rng = nullptr;

  Tensor maybe_dropout(const Tensor& x) const;
};

enum class Activation { kNone, kRelu };

struct DenseLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  Activation activation = Activation::kNone;

  static DenseLayer create(std::size_t in, std::size_t out, Activation activation, const ParamInit& init);

  std::size_t in_width() const { return weight.dim(1); }
  std::size_t out_width() const { return weight.dim(0); }
  Tensor forward(const Tensor& x) const;
  void register_parameters(const std::string& prefix, ParameterMap& params) const;
};

struct EmbeddingTable {
  Tensor table;  // [V, d_embed]

  static EmbeddingTable create(std::size_t vocab_size, std::size_t width, const ParamInit& init);

  std::size_t vocab_size() const { return table.dim(0); }
  std::size_t width() const { return table.dim(1); }
  Tensor embed(std::size_t token_id) const;
};

struct LSTMState {
  Tensor h;
  Tensor c;
};

// Gate blocks are laid out (input, forget, cell candidate, output) along the
// 4 * hidden axis of every weight and of the bias.
struct LSTMCell {
  Tensor w_input;   // [4h, d_in]
  Tensor w_hidden;  // [4h, h]
  Tensor bias;      // [4h]

  static LSTMCell create(std::size_t input_width, std::size_t hidden_width, const ParamInit& init,
                         std::optional<double> forget_bias);

  std::size_t input_width() const { return w_input.dim(1); }
  std::size_t hidden_width() const { return w_hidden.dim(1); }
  LSTMState zero_state() const;
  LSTMState step(const LSTMState& state, const Tensor& x) const;
  void register_parameters(const std::string& prefix, ParameterMap& params) const;
};

// 3x32x32 image -> conv(8@3x3) -> relu -> pool -> conv(16@3x3) -> relu -> pool
// -> flatten(16*6*6) -> dense(feature_width).
struct TinyEncoder {
  static constexpr std::size_t kChannels = 3;
  static constexpr std::size_t kImageSide = 32;
  static constexpr std::size_t kFlatWidth = 16 * 6 * 6;

  Tensor conv1_weight;  // [8, 3, 3, 3]
  Tensor conv1_bias;    // [8]
  Tensor conv2_weight;  // [16, 8, 3, 3]
  Tensor conv2_bias;    // [16]
  DenseLayer fc;

  static TinyEncoder create(std::size_t feature_width, const ParamInit& init);

  std::size_t feature_width() const { return fc.out_width(); }
  Tensor forward(const Tensor& image) const;
  void register_parameters(const std::string& prefix, ParameterMap& params) const;
};

}  // namespace nair
