// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_DETECT_EXPORT_HPP
#define AFFORD_DETECT_EXPORT_HPP

#include "afford/cloud/cloud_io.hpp"
#include "afford/core/csv.hpp"
#include "afford/detect/detector.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace afford {

inline constexpr std::string_view kDetectionHeader = "scene,test_point_id,x,y,z,affordance_id,label,orientation_id,score";

/// One detection row as read back from CSV.
struct DetectionRow {
  std::string scene;
  std::size_t test_point_id = 0;
  Vec3 test_point = Vec3::Zero();
  int affordance_id = 0;
  std::string label;
  int orientation_id = 0;
  double score = 0.0;
};

namespace export_detail {

inline std::string num(double v) {
  std::string s;
  io_detail::append_double(s, v);
  return s;
}

inline bool parse_int(std::string_view tok, int& v) {
  const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc{} && p == tok.data() + tok.size();
}

}  // namespace export_detail

inline void write_detections_csv(const DetectionResult& res, const std::string& scene, std::ostream& os,
                                 bool header = true) {
  using export_detail::num;
  if (header) os << kDetectionHeader << '\n';
  for (const auto& d : res.detections) {
    os << csv::join({scene, std::to_string(d.test_point_id), num(d.test_point.x()), num(d.test_point.y()),
                     num(d.test_point.z()), std::to_string(d.affordance_id), d.label, std::to_string(d.orientation_id),
                     num(d.score)})
       << '\n';
  }
}

inline void write_detections_csv(const DetectionResult& res, const std::string& scene,
                                 const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorKind::io, "cannot open for writing: " + path.string());
  write_detections_csv(res, scene, f);
  if (!f) fail(ErrorKind::io, "write failed: " + path.string());
}

/// Parses a detection table. Leading `#` lines are skipped; the header
/// must then match exactly.
inline std::vector<DetectionRow> read_detections_csv(const std::filesystem::path& path) {
  const std::string data = io_detail::read_file(path);
  io_detail::LineCursor cur(data);
  std::string_view line;
  bool more = cur.next(line);
  while (more && line.starts_with('#')) more = cur.next(line);
  if (!more || line != kDetectionHeader)
    throw ParseError("detection table: expected header '" + std::string(kDetectionHeader) + "'", cur.line(),
                     cur.line_start());
  std::vector<DetectionRow> rows;
  while (cur.next(line)) {
    if (line.empty()) continue;
    const auto no = cur.line();
    const auto f = csv::split(line, no);
    if (f.size() != 9) throw ParseError("detection table: expected 9 fields, got " + std::to_string(f.size()), no, 0);
    DetectionRow r;
    double x = 0, y = 0, z = 0;
    std::uint64_t tp = 0;
    if (!io_detail::parse_u64(f[1], tp) || !io_detail::parse_double(f[2], x) || !io_detail::parse_double(f[3], y) ||
        !io_detail::parse_double(f[4], z) || !export_detail::parse_int(f[5], r.affordance_id) ||
        !export_detail::parse_int(f[7], r.orientation_id) || !io_detail::parse_double(f[8], r.score))
      throw ParseError("detection table: malformed numeric field", no, 0);
    r.scene = f[0];
    r.test_point_id = tp;
    r.test_point = Vec3(x, y, z);
    r.label = f[6];
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Query objects of the first `max_detections` detections, posed into the
/// scene frame. Scene points come first when `scene` is given.
inline PointCloud overlay_cloud(const DetectionResult& res, const AgglomeratedDescriptor& descriptor,
                                const PointCloud* scene = nullptr, std::size_t max_detections = 10) {
  PointCloud out;
  if (scene) out.points = scene->points;
  const std::size_t n = std::min(max_detections, res.detections.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& d = res.detections[i];
    const auto* info = descriptor.find(d.affordance_id);
    if (!info) continue;
    for (const auto& p : info->query_object.points) out.points.push_back(d.object_pose * p);
  }
  return out;
}

}  // namespace afford

#endif  // AFFORD_DETECT_EXPORT_HPP
