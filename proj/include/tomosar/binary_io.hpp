#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>

#include "tomosar/common.hpp"

namespace tomosar {

// Little-endian scalar streams used by the dataset and weight containers.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);

  void magic(std::string_view tag);  // exactly 8 bytes, zero padded
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void close();

 private:
  template <typename T>
  void put(T v) {
    std::array<char, sizeof(T)> bytes{};
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(bytes.data(), bytes.size());
  }

  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  double f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  /// Throws IoError unless the whole file has been consumed.
  void expect_end();

 private:
  template <typename T>
  T get() {
    std::array<unsigned char, sizeof(T)> bytes{};
    in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (!in_) throw IoError(path_ + ": truncated file");
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
  }

  std::string path_;
  std::ifstream in_;
};

}  // namespace tomosar
