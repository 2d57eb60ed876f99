#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

// Little-endian binary helpers shared by the checkpoint and dataset formats.
namespace nair::io {

void put_u32(std::string& out, std::uint32_t value);
void put_f64(std::string& out, double value);

class Reader {
 public:
  Reader(std::string_view bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

  std::string_view take(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  double f64();
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never observe a
// partial file.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace nair::io
