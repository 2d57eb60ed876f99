#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "nair/dataset.hpp"
#include "nair/inference.hpp"
#include "nair/model.hpp"

namespace nair::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // bad flags, inconsistent configuration
inline constexpr int kExitData = 3;     // missing or malformed files
inline constexpr int kExitNumeric = 4;  // NaN/Inf during training, failed gradient check

// `args` excludes the program name. Subcommands: synth-data, build-vocab,
// train, evaluate, generate, grad-check.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// One line per input: "<label>\t<caption>", where label is "high", "low" or
// "-" for models without a classifier and caption is empty for models
// without a generator. Shared by `evaluate --captions` and `generate`.
std::string format_predictions(const NairModel& model, std::span<const Tensor> inputs, const Vocabulary& vocab,
                               const DecodeOptions& options);

}  // namespace nair::cli
