#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nair/dataset.hpp"
#include "nair/model.hpp"

namespace nair {

struct TrainConfig {
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  double dropout_keep = 0.7;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  double alpha = 1.0;
  double beta = 1.0;
  std::size_t max_caption_length = kMaxCaptionLength;
  // Comments used per image; 0 uses all of them.
  std::size_t comments_per_image = 0;
  // Stop after this many SGD steps; 0 means no limit.
  std::size_t max_steps = 0;
  // Global gradient-norm clip; 0 disables it.
  double clip_norm = 0.0;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  std::optional<double> valid_accuracy;
};

struct TrainResult {
  NairModel best_model;   // lowest validation loss
  NairModel final_model;  // parameters after the last step
  std::vector<EpochMetrics> log;
  std::vector<double> step_losses;
  double best_valid_loss = 0.0;
};

// One (image, label, comment) instance per comment of every example in
// `split`, in manifest order.
std::vector<Instance> make_instances(const Dataset& dataset, Split split, const Vocabulary& vocab,
                                     std::size_t max_caption_length = kMaxCaptionLength,
                                     std::size_t comments_per_image = 0);

// p <- p - lr * grad(p) for every tensor in `params`, optionally after global
// norm clipping.
void apply_sgd(const ParameterMap& params, double learning_rate, double clip_norm = 0.0);

// One SGD step on the mean task loss of `batch`. Dropout follows
// config.dropout_keep and draws masks from `rng`. Returns the batch loss.
double sgd_step(NairModel& model, std::span<const Instance> batch, const TrainConfig& config,
                std::mt19937_64& rng, std::string_view batch_label = "batch");

// Mean task loss without dropout.
double evaluate_loss(const NairModel& model, std::span<const Instance> instances, const TrainConfig& config);
// Classification accuracy over examples; nullopt for models without a classifier.
std::optional<double> evaluate_accuracy(const NairModel& model, std::span<const ReviewExample* const> examples);

TrainResult train(const NairModel& initial, const Dataset& dataset, const Vocabulary& vocab,
                  const TrainConfig& config);

// "epoch,train_loss,valid_loss,valid_accuracy" rows; an empty accuracy field
// for generator-only models.
std::string metrics_log_csv(std::span<const EpochMetrics> log);

struct GridPoint {
  double alpha = 1.0;
  double beta = 1.0;
};

struct GridResult {
  GridPoint point;
  double valid_accuracy = 0.0;
  double valid_bleu1 = 0.0;
};

struct TuneResult {
  GridPoint best;
  std::vector<GridResult> evaluated;  // grid order
};

using ModelFactory = std::function<NairModel()>;

// Trains a fresh model for one grid point and scores its best checkpoint on
// the validation split (accuracy, greedy BLEU-1).
GridResult evaluate_grid_point(const ModelFactory& factory, const Dataset& dataset, const Vocabulary& vocab,
                               GridPoint point, const TrainConfig& config);

// Highest validation accuracy; ties go to higher BLEU-1, then to grid order.
TuneResult tune_alpha_beta(const ModelFactory& factory, const Dataset& dataset, const Vocabulary& vocab,
                           std::span<const GridPoint> grid, const TrainConfig& config);

std::vector<GridPoint> grid_product(std::span<const double> values);

}  // namespace nair
