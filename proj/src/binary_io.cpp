#include "tomosar/binary_io.hpp"

namespace tomosar {

BinaryWriter::BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
}

void BinaryWriter::magic(std::string_view tag) {
  std::array<char, 8> bytes{};
  for (std::size_t i = 0; i < tag.size() && i < bytes.size(); ++i) bytes[i] = tag[i];
  out_.write(bytes.data(), bytes.size());
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) throw IoError("write failed for '" + path_ + "'");
}

BinaryReader::BinaryReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw IoError("cannot open '" + path + "' for reading");
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::array<char, 8> bytes{};
  in_.read(bytes.data(), bytes.size());
  if (!in_) throw IoError(path_ + ": truncated header");
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const char want = i < tag.size() ? tag[i] : '\0';
    if (bytes[i] != want) throw IoError(path_ + ": bad magic, not a " + std::string(tag) + " file");
  }
}

void BinaryReader::expect_end() {
  if (in_.peek() != std::char_traits<char>::eof()) throw IoError(path_ + ": trailing bytes after payload");
}

}  // namespace tomosar
