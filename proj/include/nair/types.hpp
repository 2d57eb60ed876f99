#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace nair {

// Aesthetic class. Ordering Low < High is relied on by the label rule.
enum class Label : std::uint8_t { kLow = 0, kHigh = 1 };

inline std::string_view label_name(Label label) { return label == Label::kHigh ? "high" : "low"; }

// Reserved vocabulary ids.
namespace token {
inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kStart = 1;
inline constexpr std::size_t kEnd = 2;
inline constexpr std::size_t kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;
}  // namespace token

}  // namespace nair
