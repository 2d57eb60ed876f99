#pragma once

#include <filesystem>
#include <string>

#include "nair/model.hpp"

namespace nair {

// Binary layout, all integers little-endian:
//   "NAIRCKPT1" | u8 variant tag |
//   per parameter in lexicographic name order:
//     u32 name length | name bytes | u8 rank | u32 dims[rank] | f64 values
// The model configuration is recovered from parameter names and shapes.
std::string serialize_checkpoint(const NairModel& model);
NairModel deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const NairModel& model, const std::filesystem::path& path);
NairModel load_checkpoint(const std::filesystem::path& path);

}  // namespace nair
