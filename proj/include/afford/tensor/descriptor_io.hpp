// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_TENSOR_DESCRIPTOR_IO_HPP
#define AFFORD_TENSOR_DESCRIPTOR_IO_HPP

#include "afford/cloud/cloud_io.hpp"
#include "afford/core/container.hpp"
#include "afford/tensor/descriptor.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

namespace afford {

/// Binary layout after the container header:
///   string build_config | i32 k | string label | u64 N | i32 orientations |
///   vec3 centroid_offset | pose | cloud query_object |
///   u64 count | count x (vec3 x, vec3 p, f64 w, i32 orientation_id)
inline void save_descriptor(const AffordanceDescriptor& d, const std::filesystem::path& path) {
  auto w = container::begin(container::Type::single);
  w.put_string(d.build_config);
  w.put(static_cast<std::int32_t>(d.affordance_id));
  w.put_string(d.label);
  w.put(static_cast<std::uint64_t>(d.per_orientation));
  w.put(static_cast<std::int32_t>(d.orientations));
  w.put(d.centroid_offset);
  container::put_pose(w, d.object_pose);
  container::put_cloud(w, d.query_object);
  w.put(static_cast<std::uint64_t>(d.keypoints.size()));
  for (const auto& k : d.keypoints) {
    w.put(k.position);
    w.put(k.provenance);
    w.put(k.weight);
    w.put(static_cast<std::int32_t>(k.orientation_id));
  }
  w.seal();
  w.save(path);
}

inline AffordanceDescriptor load_affordance_descriptor(const std::filesystem::path& path) {
  auto [r, type] = container::open(path);
  if (type != container::Type::single)
    fail(ErrorKind::invalid_argument, path.string() + ": holds an agglomerated descriptor, not a single one");
  AffordanceDescriptor d;
  d.build_config = r.get_string();
  d.affordance_id = r.get<std::int32_t>();
  d.label = r.get_string();
  d.per_orientation = r.get<std::uint64_t>();
  d.orientations = r.get<std::int32_t>();
  d.centroid_offset = r.get_vec3();
  d.object_pose = container::get_pose(r);
  d.query_object = container::get_cloud(r);
  const auto n = r.get<std::uint64_t>();
  if (n > r.remaining() / 60) fail(ErrorKind::corrupt, path.string() + ": keypoint count exceeds payload");
  d.keypoints.resize(n);
  for (auto& k : d.keypoints) {
    k.position = r.get_vec3();
    k.provenance = r.get_vec3();
    k.weight = r.get<double>();
    k.orientation_id = r.get<std::int32_t>();
    k.affordance_id = d.affordance_id;
  }
  container::expect_end(r, path);
  if (d.orientations < 1 || d.per_orientation * static_cast<std::uint64_t>(d.orientations) != n)
    fail(ErrorKind::corrupt, path.string() + ": keypoint count does not match N x orientations");
  return d;
}

/// Human-readable dump: a `key value` header (led by an optional one-line
/// `config` entry), then one keypoint per line as
/// `x y z px py pz w orientation`. Numbers use the shortest exact form, so
/// read_descriptor_text restores the keypoints bit for bit.
inline void write_descriptor_text(const AffordanceDescriptor& d, std::ostream& out) {
  std::string s = "afford-descriptor 1\n";
  auto num = [&s](double v) { io_detail::append_double(s, v); };
  auto vec = [&](const Vec3& v) {
    num(v.x());
    s += ' ';
    num(v.y());
    s += ' ';
    num(v.z());
  };
  if (!d.build_config.empty()) {
    require(d.build_config.find('\n') == std::string::npos, "write_descriptor_text: build config must be one line");
    s += "config " + d.build_config + "\n";
  }
  s += "affordance_id " + std::to_string(d.affordance_id) + "\n";
  s += "label " + d.label + "\n";
  s += "per_orientation " + std::to_string(d.per_orientation) + "\n";
  s += "orientations " + std::to_string(d.orientations) + "\n";
  s += "centroid_offset ";
  vec(d.centroid_offset);
  s += "\nobject_pose";
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      s += ' ';
      num(d.object_pose.matrix()(i, j));
    }
  s += "\nkeypoints " + std::to_string(d.keypoints.size()) + "\n";
  for (const auto& k : d.keypoints) {
    vec(k.position);
    s += ' ';
    vec(k.provenance);
    s += ' ';
    num(k.weight);
    s += ' ' + std::to_string(k.orientation_id) + '\n';
  }
  out << s;
}

inline AffordanceDescriptor read_descriptor_text(const std::filesystem::path& path) {
  const std::string data = io_detail::read_file(path);
  io_detail::LineCursor cur(data);
  std::string_view line;
  auto next = [&]() {
    if (!cur.next(line)) cur.error("unexpected end of descriptor dump");
    return io_detail::split_ws(line);
  };
  auto real = [&](std::string_view t) {
    double v;
    if (!io_detail::parse_double(t, v)) cur.error("bad number '" + std::string(t) + "'");
    return v;
  };
  auto count = [&](std::string_view t) {
    std::uint64_t v;
    if (!io_detail::parse_u64(t, v)) cur.error("bad count '" + std::string(t) + "'");
    return v;
  };
  auto integer = [&](std::string_view t) {
    int v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || p != t.data() + t.size()) cur.error("bad integer '" + std::string(t) + "'");
    return v;
  };
  auto field = [&](std::string_view key, std::size_t n) {
    auto tok = next();
    if (tok.empty() || tok[0] != key || tok.size() != n + 1) cur.error("expected '" + std::string(key) + "'");
    return tok;
  };

  auto head = next();
  if (head.size() != 2 || head[0] != "afford-descriptor") cur.error("not a descriptor dump");
  if (head[1] != "1") throw Error(ErrorKind::version, "descriptor dump version " + std::string(head[1]) + " is not supported");
  AffordanceDescriptor d;
  auto id_line = next();
  if (line.starts_with("config ")) {
    d.build_config = std::string(line.substr(7));
    id_line = next();
  }
  if (id_line.size() != 2 || id_line[0] != "affordance_id") cur.error("expected 'affordance_id'");
  d.affordance_id = integer(id_line[1]);
  if (!cur.next(line) || !line.starts_with("label")) cur.error("expected 'label'");
  d.label = std::string(line.size() > 6 ? line.substr(6) : std::string_view{});
  d.per_orientation = count(field("per_orientation", 1)[1]);
  d.orientations = integer(field("orientations", 1)[1]);
  auto off = field("centroid_offset", 3);
  d.centroid_offset = {real(off[1]), real(off[2]), real(off[3])};
  auto pose = field("object_pose", 12);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) d.object_pose.matrix()(i, j) = real(pose[1 + i * 4 + j]);
  const auto n = count(field("keypoints", 1)[1]);
  d.keypoints.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    auto tok = next();
    if (tok.size() != 8) cur.error("keypoint line needs 8 fields");
    AffordanceKeypoint k;
    k.position = {real(tok[0]), real(tok[1]), real(tok[2])};
    k.provenance = {real(tok[3]), real(tok[4]), real(tok[5])};
    k.weight = real(tok[6]);
    k.orientation_id = integer(tok[7]);
    k.affordance_id = d.affordance_id;
    d.keypoints.push_back(k);
  }
  return d;
}

}  // namespace afford

#endif  // AFFORD_TENSOR_DESCRIPTOR_IO_HPP
