// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CORE_CONTAINER_HPP
#define AFFORD_CORE_CONTAINER_HPP

// Framing shared by the descriptor files:
//   "ITNS" | u16 version | u16 type | payload ... | u32 crc32(everything before)

#include "afford/cloud/point_cloud.hpp"
#include "afford/core/binary_io.hpp"
#include "afford/core/error.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace afford::container {

inline constexpr std::string_view kMagic = "ITNS";
inline constexpr std::uint16_t kVersion = 1;

enum class Type : std::uint16_t { single = 1, agglomerated = 2 };

inline std::string_view to_string(Type t) { return t == Type::single ? "single" : "agglomerated"; }

inline bin::Writer begin(Type type, std::uint16_t version = kVersion) {
  bin::Writer w;
  w.put_raw(kMagic);
  w.put(version);
  w.put(static_cast<std::uint16_t>(type));
  return w;
}

/// Checks magic, version and checksum (in that order, so a newer file is
/// reported as a version problem rather than as damage) and returns the
/// reader positioned after the header together with the type tag.
inline std::pair<bin::Reader, Type> open(const std::filesystem::path& path) {
  auto r = bin::Reader::load(path);
  if (r.size() < kMagic.size() || r.get_raw(kMagic.size()) != kMagic)
    fail(ErrorKind::corrupt, path.string() + ": not a descriptor container (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion)
    fail(ErrorKind::version, path.string() + ": container version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kVersion) + ")");
  const auto tag = r.get<std::uint16_t>();
  r.verify_seal();
  if (tag != static_cast<std::uint16_t>(Type::single) && tag != static_cast<std::uint16_t>(Type::agglomerated))
    fail(ErrorKind::corrupt, path.string() + ": unknown container type " + std::to_string(tag));
  return {std::move(r), static_cast<Type>(tag)};
}

inline Type peek_type(const std::filesystem::path& path) { return open(path).second; }

inline void put_pose(bin::Writer& w, const Rigid& t) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) w.put(t.matrix()(i, j));
}

inline Rigid get_pose(bin::Reader& r) {
  Rigid t = Rigid::Identity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) t.matrix()(i, j) = r.get<double>();
  return t;
}

inline void put_cloud(bin::Writer& w, const PointCloud& c) {
  w.put_string(c.frame_id);
  w.put(static_cast<std::uint64_t>(c.points.size()));
  w.put(static_cast<std::uint8_t>(c.has_normals()));
  for (const auto& p : c.points) w.put(p);
  for (const auto& n : c.normals) w.put(n);
}

inline PointCloud get_cloud(bin::Reader& r) {
  PointCloud c;
  c.frame_id = r.get_string();
  const auto n = r.get<std::uint64_t>();
  const bool normals = r.get<std::uint8_t>() != 0;
  if (n > r.remaining() / 24) fail(ErrorKind::corrupt, "cloud length exceeds payload");
  c.points.resize(n);
  for (auto& p : c.points) p = r.get_vec3();
  if (normals) {
    c.normals.resize(n);
    for (auto& v : c.normals) v = r.get_vec3();
  }
  return c;
}

/// Fails unless the reader consumed the payload exactly.
inline void expect_end(const bin::Reader& r, const std::filesystem::path& path) {
  if (r.remaining() != 0)
    fail(ErrorKind::corrupt, path.string() + ": " + std::to_string(r.remaining()) + " unexpected trailing bytes");
}

}  // namespace afford::container

#endif  // AFFORD_CORE_CONTAINER_HPP
