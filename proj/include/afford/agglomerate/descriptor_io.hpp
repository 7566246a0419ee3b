// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_AGGLOMERATE_DESCRIPTOR_IO_HPP
#define AFFORD_AGGLOMERATE_DESCRIPTOR_IO_HPP

#include "afford/agglomerate/clustering.hpp"
#include "afford/cloud/cloud_io.hpp"
#include "afford/core/container.hpp"

#include <filesystem>
#include <ostream>
#include <string>

namespace afford {

/// Binary layout after the container header:
///   string build_config | f64 e | u8 mode | i32 orientations |
///   u32 affordances x (i32 id, string label, vec3 offset, pose, u64 source keypoints, cloud) |
///   u64 cells x (vec3 centroid, u32 entries x (i32 k, i32 o, u32 members, u32 kept x (vec3 x, vec3 p, f64 w)))
inline void save_descriptor(const AgglomeratedDescriptor& d, const std::filesystem::path& path) {
  auto w = container::begin(container::Type::agglomerated);
  w.put_string(d.build_config);
  w.put(d.cell_size);
  w.put(static_cast<std::uint8_t>(d.mode));
  w.put(static_cast<std::int32_t>(d.orientations));
  w.put(static_cast<std::uint32_t>(d.affordances.size()));
  for (const auto& a : d.affordances) {
    w.put(static_cast<std::int32_t>(a.id));
    w.put_string(a.label);
    w.put(a.centroid_offset);
    container::put_pose(w, a.object_pose);
    w.put(a.source_keypoints);
    container::put_cloud(w, a.query_object);
  }
  w.put(static_cast<std::uint64_t>(d.cells.size()));
  for (const auto& c : d.cells) {
    w.put(c.centroid);
    w.put(static_cast<std::uint32_t>(c.entries.size()));
    for (const auto& e : c.entries) {
      w.put(static_cast<std::int32_t>(e.affordance_id));
      w.put(static_cast<std::int32_t>(e.orientation_id));
      w.put(e.member_count);
      w.put(static_cast<std::uint32_t>(e.kept.size()));
      for (const auto& k : e.kept) {
        w.put(k.position);
        w.put(k.provenance);
        w.put(k.weight);
      }
    }
  }
  w.seal();
  w.save(path);
}

inline AgglomeratedDescriptor load_descriptor(const std::filesystem::path& path) {
  auto [r, type] = container::open(path);
  if (type != container::Type::agglomerated)
    fail(ErrorKind::invalid_argument, path.string() + ": holds a single-affordance descriptor, not an agglomerated one");
  AgglomeratedDescriptor d;
  d.build_config = r.get_string();
  d.cell_size = r.get<double>();
  const auto mode = r.get<std::uint8_t>();
  if (mode > static_cast<std::uint8_t>(ClusterMode::all)) fail(ErrorKind::corrupt, path.string() + ": unknown cluster mode");
  d.mode = static_cast<ClusterMode>(mode);
  d.orientations = r.get<std::int32_t>();
  const auto na = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < na; ++i) {
    AffordanceInfo a;
    a.id = r.get<std::int32_t>();
    a.label = r.get_string();
    a.centroid_offset = r.get_vec3();
    a.object_pose = container::get_pose(r);
    a.source_keypoints = r.get<std::uint64_t>();
    a.query_object = container::get_cloud(r);
    d.affordances.push_back(std::move(a));
  }
  const auto nc = r.get<std::uint64_t>();
  if (nc > r.remaining() / 28) fail(ErrorKind::corrupt, path.string() + ": cell count exceeds payload");
  d.cells.resize(nc);
  for (auto& c : d.cells) {
    c.centroid = r.get_vec3();
    c.entries.resize(r.get<std::uint32_t>());
    for (auto& e : c.entries) {
      e.affordance_id = r.get<std::int32_t>();
      e.orientation_id = r.get<std::int32_t>();
      e.member_count = r.get<std::uint32_t>();
      const auto nk = r.get<std::uint32_t>();
      if (nk > r.remaining() / 56) fail(ErrorKind::corrupt, path.string() + ": kept count exceeds payload");
      e.kept.resize(nk);
      for (auto& k : e.kept) {
        k.position = r.get_vec3();
        k.provenance = r.get_vec3();
        k.weight = r.get<double>();
      }
    }
  }
  container::expect_end(r, path);
  return d;
}

/// Text manifest listing the constituent affordances and the build summary.
/// A single-line build config is echoed after the version line.
inline void write_manifest(const AgglomeratedDescriptor& d, std::ostream& out) {
  std::string s = "afford-agglomerated 1\n";
  if (!d.build_config.empty() && d.build_config.find('\n') == std::string::npos) s += "config " + d.build_config + "\n";
  s += "cell_size ";
  io_detail::append_double(s, d.cell_size);
  s += "\nmode " + std::string(to_string(d.mode)) + "\n";
  s += "orientations " + std::to_string(d.orientations) + "\n";
  s += "centroids " + std::to_string(d.cells.size()) + "\n";
  s += "kept_keypoints " + std::to_string(d.kept_count()) + "\n";
  s += "source_keypoints " + std::to_string(d.member_count()) + "\n";
  s += "affordances " + std::to_string(d.affordances.size()) + "\n";
  s += "# id source_keypoints label\n";
  for (const auto& a : d.affordances)
    s += std::to_string(a.id) + ' ' + std::to_string(a.source_keypoints) + ' ' + a.label + '\n';
  out << s;
}

}  // namespace afford

#endif  // AFFORD_AGGLOMERATE_DESCRIPTOR_IO_HPP
