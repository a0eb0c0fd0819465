#include "d4d/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "d4d/error.hpp"

namespace d4d {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swapping");

void BinaryWriter::magic(std::string_view tag) {
  buffer_.insert(buffer_.end(), tag.begin(), tag.end());
}

void BinaryWriter::u32(std::uint32_t v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  buffer_.insert(buffer_.end(), raw, raw + 4);
}

void BinaryWriter::f32(float v) {
  std::uint8_t raw[4];
  std::memcpy(raw, &v, 4);
  buffer_.insert(buffer_.end(), raw, raw + 4);
}

void BinaryWriter::f32s(std::span<const float> values) {
  const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
  buffer_.insert(buffer_.end(), raw, raw + values.size_bytes());
}

void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

void BinaryWriter::save(const std::filesystem::path& path) const { write_file(path, buffer_); }

BinaryReader BinaryReader::open(const std::filesystem::path& path) {
  return BinaryReader(read_file(path), path.string());
}

BinaryReader::BinaryReader(std::vector<std::uint8_t> data, std::string source)
    : data_(std::move(data)), source_(std::move(source)) {}

void BinaryReader::require(std::size_t n) const {
  if (remaining() < n) {
    throw Error(Errc::kTruncated,
                fmt::format("{}: truncated payload (need {} bytes at offset {}, have {})", source_,
                            n, pos_, remaining()));
  }
}

std::string BinaryReader::peek_magic() const {
  if (remaining() < 4) return {};
  return std::string(reinterpret_cast<const char*>(data_.data() + pos_), 4);
}

void BinaryReader::expect_magic(std::string_view tag) {
  if (remaining() < tag.size()) {
    throw Error(Errc::kBadMagic, fmt::format("{}: magic mismatch (file too short for '{}')",
                                             source_, tag));
  }
  if (std::memcmp(data_.data() + pos_, tag.data(), tag.size()) != 0) {
    throw Error(Errc::kBadMagic, fmt::format("{}: magic mismatch (expected '{}')", source_, tag));
  }
  pos_ += tag.size();
}

std::uint32_t BinaryReader::u32() {
  require(4);
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

float BinaryReader::f32() {
  require(4);
  float v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

void BinaryReader::f32s(std::span<float> out) {
  require(out.size_bytes());
  std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

void BinaryReader::bytes(std::span<std::uint8_t> out) {
  require(out.size());
  std::memcpy(out.data(), data_.data() + pos_, out.size());
  pos_ += out.size();
}

void BinaryReader::expect_end() const {
  if (remaining() != 0) {
    throw Error(Errc::kCountMismatch,
                fmt::format("{}: {} unexpected trailing bytes", source_, remaining()));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIo, fmt::format("{}: cannot open for reading", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::kIo, fmt::format("{}: cannot open for writing", path.string()));
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(Errc::kIo, fmt::format("{}: write failed", path.string()));
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text(const std::filesystem::path& path) {
  const auto raw = read_file(path);
  return {raw.begin(), raw.end()};
}

}  // namespace d4d
