#include "nair/layers.hpp"

#include "nair/error.hpp"

namespace nair {

Tensor ParamInit::make(Shape shape) const {
  return Tensor::uniform(std::move(shape), -range, range, rng, /*requires_grad=*/true);
}

Tensor ForwardContext::maybe_dropout(const Tensor& x) const {
  if (!train || dropout_keep >= 1.0) return x;
  if (rng == nullptr) throw ContractError("dropout during training needs an rng");
  return dropout(x, dropout_keep, *rng);
}

DenseLayer DenseLayer::create(std::size_t in, std::size_t out, Activation activation,
                              const ParamInit& init) {
  DenseLayer layer;
  layer.weight = init.make({out, in});
  layer.bias = init.make({out});
  layer.activation = activation;
  return layer;
}

Tensor DenseLayer::forward(const Tensor& x) const {
  if (x.rank() != 1 || x.size() != in_width()) {
    throw DimensionError("dense layer expects input width " + std::to_string(in_width()) +
                         ", got " + shape_to_string(x.shape()));
  }
  Tensor y = matmul(weight, x) + bias;
  return activation == Activation::kRelu ? relu(y) : y;
}

void DenseLayer::register_parameters(const std::string& prefix, ParameterMap& params) const {
  params.emplace(prefix + ".weight", weight);
  params.emplace(prefix + ".bias", bias);
}

EmbeddingTable EmbeddingTable::create(std::size_t vocab_size, std::size_t width,
                                      const ParamInit& init) {
  return EmbeddingTable{init.make({vocab_size, width})};
}

Tensor EmbeddingTable::embed(std::size_t token_id) const { return embedding_lookup(table, token_id); }

LSTMCell LSTMCell::create(std::size_t input_width, std::size_t hidden_width, const ParamInit& init,
                          std::optional<double> forget_bias) {
  LSTMCell cell;
  cell.w_input = init.make({4 * hidden_width, input_width});
  cell.w_hidden = init.make({4 * hidden_width, hidden_width});
  cell.bias = init.make({4 * hidden_width});
  if (forget_bias) {
    auto b = cell.bias.mutable_data();
    for (std::size_t i = hidden_width; i < 2 * hidden_width; ++i) b[i] = *forget_bias;
  }
  return cell;
}

LSTMState LSTMCell::zero_state() const {
  return LSTMState{Tensor::zeros({hidden_width()}), Tensor::zeros({hidden_width()})};
}

LSTMState LSTMCell::step(const LSTMState& state, const Tensor& x) const {
  const std::size_t hw = hidden_width();
  if (x.rank() != 1 || x.size() != input_width()) {
    throw DimensionError("lstm step expects input width " + std::to_string(input_width()) +
                         ", got " + shape_to_string(x.shape()));
  }
  if (state.h.size() != hw || state.c.size() != hw) {
    throw DimensionError("lstm state width does not match hidden width " + std::to_string(hw));
  }
  Tensor gates = matmul(w_input, x) + matmul(w_hidden, state.h) + bias;
  Tensor i = sigmoid(slice(gates, 0, hw));
  Tensor f = sigmoid(slice(gates, hw, hw));
  Tensor g = tanh(slice(gates, 2 * hw, hw));
  Tensor o = sigmoid(slice(gates, 3 * hw, hw));
  Tensor c = f * state.c + i * g;
  Tensor h = o * tanh(c);
  return LSTMState{h, c};
}

void LSTMCell::register_parameters(const std::string& prefix, ParameterMap& params) const {
  params.emplace(prefix + ".w_input", w_input);
  params.emplace(prefix + ".w_hidden", w_hidden);
  params.emplace(prefix + ".bias", bias);
}

TinyEncoder TinyEncoder::create(std::size_t feature_width, const ParamInit& init) {
  TinyEncoder enc;
  enc.conv1_weight = init.make({8, kChannels, 3, 3});
  enc.conv1_bias = init.make({8});
  enc.conv2_weight = init.make({16, 8, 3, 3});
  enc.conv2_bias = init.make({16});
  enc.fc = DenseLayer::create(kFlatWidth, feature_width, Activation::kNone, init);
  return enc;
}

Tensor TinyEncoder::forward(const Tensor& image) const {
  if (image.shape() != Shape{kChannels, kImageSide, kImageSide}) {
    throw DimensionError("tiny encoder expects a [3x32x32] image, got " + shape_to_string(image.shape()));
  }
  Tensor x = max_pool2x2(relu(add_channel_bias(conv2d(image, conv1_weight), conv1_bias)));
  x = max_pool2x2(relu(add_channel_bias(conv2d(x, conv2_weight), conv2_bias)));
  return fc.forward(flatten(x));
}

void TinyEncoder::register_parameters(const std::string& prefix, ParameterMap& params) const {
  params.emplace(prefix + ".conv1.weight", conv1_weight);
  params.emplace(prefix + ".conv1.bias", conv1_bias);
  params.emplace(prefix + ".conv2.weight", conv2_weight);
  params.emplace(prefix + ".conv2.bias", conv2_bias);
  fc.register_parameters(prefix + ".fc", params);
}

}  // namespace nair
