#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nair/layers.hpp"
#include "nair/tensor.hpp"
#include "nair/types.hpp"

namespace nair {

enum class Variant : std::uint8_t {
  kIAC = 0,         // classifier only
  kV2L = 1,         // caption generator only
  kMTBaseline = 2,  // joint loss, encoder weights trained
  kModelI = 3,      // joint loss over a shared semantic layer
  kModelII = 4,     // shared layer plus task-specific layers
};

enum class EncoderMode { kFrozenFeatures, kTrainableTiny };

std::string_view variant_name(Variant variant);  // CLI spelling: iac, v2l, ...
Variant parse_variant(std::string_view name);
bool is_multi_task(Variant variant);
bool has_classifier(Variant variant);
bool has_generator(Variant variant);

struct ModelConfig {
  Variant variant = Variant::kModelII;
  EncoderMode encoder_mode = EncoderMode::kFrozenFeatures;
  // Width of the image vector v: the feature file width, or the tiny
  // encoder's output width in kTrainableTiny mode.
  std::size_t feature_width = 2048;
  std::size_t vocab_size = 0;
  std::size_t embed_width = 512;
  std::size_t hidden_width = 512;
  std::size_t shared_width = 512;
  std::size_t specific_width = 256;
  std::size_t lstm_layers = 1;
  double init_range = 0.08;
  std::optional<double> forget_bias = 1.0;
  std::uint64_t seed = 0;

  // Published widths: 512-unit shared layer for Model-I, 256 + 256 for
  // Model-II; the MT baseline uses the tiny encoder with a 64-wide output.
  static ModelConfig defaults(Variant variant, std::size_t vocab_size);

  void validate() const;
};

struct Representation {
  Tensor cls;  // classifier input
  Tensor gen;  // caption generator input (x_{-1} before projection)
};

// One recurrent step of decoding state, one LSTMState per layer.
struct DecoderState {
  std::vector<LSTMState> layers;
};

class NairModel {
 public:
  explicit NairModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }
  const ParameterMap& parameters() const { return params_; }

  // Expected shape of one image input: [feature_width] or [3, 32, 32].
  Shape input_shape() const;
  std::size_t rep_cls_width() const;
  std::size_t rep_gen_width() const;

  // Deep copy, parameters included.
  NairModel clone() const;
  // Overwrites every parameter value from `source` (same names and shapes).
  void copy_parameters_from(const ParameterMap& source);

  std::optional<TinyEncoder> encoder;
  std::optional<DenseLayer> shared;        // W_s
  std::optional<DenseLayer> cls_specific;  // W_c
  std::optional<DenseLayer> gen_specific;  // W_g
  std::optional<DenseLayer> classifier;
  std::optional<DenseLayer> image_proj;    // rep_gen -> embed width, when they differ
  std::optional<EmbeddingTable> embedding;
  std::vector<LSTMCell> lstm;
  std::optional<DenseLayer> output;        // hidden -> vocabulary logits

 private:
  ModelConfig config_;
  ParameterMap params_;
};

// One (image, label, caption) training triple. `caption` holds w_1..w_L
// without START/END.
struct Instance {
  Tensor input;
  Label label = Label::kLow;
  std::vector<std::size_t> caption;
};

struct Losses {
  std::optional<Tensor> aesthetics;
  std::optional<Tensor> language;
  Tensor total;
};

struct ForwardOutput {
  std::optional<Tensor> class_logits;
  std::vector<Tensor> step_logits;  // predictions of w_1..w_L, END
  Losses losses;
};

// Image input -> v. Identity in frozen-feature mode.
Tensor encode_image(const NairModel& model, const Tensor& input);
Representation representation(const NairModel& model, const Tensor& v);

Tensor class_logits(const NairModel& model, const Tensor& rep_cls);
Tensor aesthetics_loss(const NairModel& model, const Tensor& rep_cls, Label label);
// Mean over a batch.
Tensor aesthetics_loss(const NairModel& model, std::span<const Tensor> rep_cls,
                       std::span<const Label> labels);

// Sum of per-step cross-entropies of w_1..w_L and END given the image step
// and START. `step_logits`, when given, receives the L + 1 logit vectors.
Tensor language_loss(const NairModel& model, const Tensor& rep_gen,
                     std::span<const std::size_t> caption, const ForwardContext& ctx = {},
                     std::vector<Tensor>* step_logits = nullptr);

ForwardOutput forward(const NairModel& model, const Instance& instance, double alpha, double beta,
                      const ForwardContext& ctx = {});

// alpha * L_aesthetics + beta * L_language; multi-task variants only.
Tensor joint_loss(const NairModel& model, const Instance& instance, double alpha, double beta,
                  const ForwardContext& ctx = {});

// Loss the variant is trained on: joint for multi-task variants, the single
// task loss otherwise (alpha/beta ignored).
Tensor task_loss(const NairModel& model, const Instance& instance, double alpha, double beta,
                 const ForwardContext& ctx = {});

ParameterMap trainable_parameters(const NairModel& model);
// Names of parameters that belong to the image encoder.
bool is_encoder_parameter(const std::string& name);

DecoderState decoder_start(const NairModel& model, const Tensor& rep_gen,
                           const ForwardContext& ctx = {});
// Feeds `token` and returns next-token logits.
Tensor decoder_step(const NairModel& model, DecoderState& state, std::size_t token,
                    const ForwardContext& ctx = {});

// Sum of log p(token_t | image, START, tokens_<t) over `tokens`, which may end
// in END.
double caption_log_prob(const NairModel& model, const Tensor& rep_gen,
                        std::span<const std::size_t> tokens);

}  // namespace nair
