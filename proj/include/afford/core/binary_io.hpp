// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CORE_BINARY_IO_HPP
#define AFFORD_CORE_BINARY_IO_HPP

#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace afford::bin {

static_assert(std::endian::native == std::endian::little,
              "binary containers are written in host order and assume little-endian hosts");

/// Append-only little-endian byte buffer.
class Writer {
public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put(const Vec3& v) {
    put(v.x());
    put(v.y());
    put(v.z());
  }

  void put_string(std::string_view s) {
    put(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }

  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  const std::vector<char>& bytes() const { return bytes_; }

  /// Appends the CRC-32 of everything written so far.
  void seal() {
    const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes_.data()),
                             static_cast<uInt>(bytes_.size()));
    put(static_cast<std::uint32_t>(crc));
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot open for writing: " + path.string());
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) fail(ErrorKind::io, "write failed: " + path.string());
  }

private:
  std::vector<char> bytes_;
};

/// Bounds-checked reader over an in-memory buffer. Running past the end
/// raises a corrupt-payload error with the offending offset.
class Reader {
public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  static Reader load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(bytes));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  Vec3 get_vec3() {
    const double x = get<double>();
    const double y = get<double>();
    const double z = get<double>();
    return {x, y, z};
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_raw(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  /// Verifies the trailing CRC-32 and hides it from subsequent reads.
  void verify_seal() {
    if (bytes_.size() < 4) fail(ErrorKind::corrupt, "container too short for checksum");
    std::uint32_t stored;
    std::memcpy(&stored, bytes_.data() + bytes_.size() - 4, 4);
    const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes_.data()),
                             static_cast<uInt>(bytes_.size() - 4));
    if (static_cast<std::uint32_t>(crc) != stored)
      fail(ErrorKind::corrupt, "checksum mismatch (truncated or damaged payload)");
    end_ = bytes_.size() - 4;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return limit() - pos_; }
  std::size_t size() const { return bytes_.size(); }

private:
  std::size_t limit() const { return end_ ? end_ : bytes_.size(); }

  void need(std::size_t n) const {
    if (pos_ + n > limit())
      fail(ErrorKind::corrupt, "unexpected end of payload at byte " + std::to_string(pos_));
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

}  // namespace afford::bin

#endif  // AFFORD_CORE_BINARY_IO_HPP
