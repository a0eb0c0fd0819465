#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace d4d {

/// Little-endian binary writer that accumulates into memory and writes the
/// whole file at once.
class BinaryWriter {
 public:
  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void f32(float v);
  void f32s(std::span<const float> values);
  void bytes(std::span<const std::uint8_t> data);

  const std::vector<std::uint8_t>& buffer() const { return buffer_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buffer_;
};

/// Bounds-checked reader over a fully loaded file. Every failure names the
/// source file.
class BinaryReader {
 public:
  static BinaryReader open(const std::filesystem::path& path);
  BinaryReader(std::vector<std::uint8_t> data, std::string source);

  // Throws Errc::kBadMagic when the next four bytes differ from tag.
  void expect_magic(std::string_view tag);
  std::string peek_magic() const;
  std::uint32_t u32();
  float f32();
  void f32s(std::span<float> out);
  void bytes(std::span<std::uint8_t> out);

  std::size_t remaining() const { return data_.size() - pos_; }
  // Throws Errc::kTruncated if fewer than n bytes remain.
  void require(std::size_t n) const;
  // Throws Errc::kCountMismatch if trailing bytes remain.
  void expect_end() const;
  const std::string& source() const { return source_; }

 private:
  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string source_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace d4d
