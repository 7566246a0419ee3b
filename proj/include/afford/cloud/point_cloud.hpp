// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CLOUD_POINT_CLOUD_HPP
#define AFFORD_CLOUD_POINT_CLOUD_HPP

#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace afford {

/// Metric pointcloud, +z up. Normals are optional; when present there is
/// exactly one unit normal per point.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
  std::string frame_id;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws a data error naming the first offending point.
  void validate() const {
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!all_finite(points[i]))
        fail(ErrorKind::data, "non-finite coordinate at point " + std::to_string(i));
    }
    if (normals.empty()) return;
    if (normals.size() != points.size())
      fail(ErrorKind::data, "normal count " + std::to_string(normals.size()) +
                                " does not match point count " + std::to_string(points.size()));
    for (std::size_t i = 0; i < normals.size(); ++i) {
      const double n = normals[i].norm();
      if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6)
        fail(ErrorKind::data, "normal at point " + std::to_string(i) + " is not unit length");
    }
  }

  friend bool operator==(const PointCloud& a, const PointCloud& b) {
    return a.points == b.points && a.normals == b.normals;
  }
};

/// Subtracts the centroid. Returns the centred cloud and the removed centroid.
inline std::pair<PointCloud, Vec3> zero_mean(const PointCloud& cloud) {
  if (cloud.empty()) fail(ErrorKind::invalid_argument, "zero_mean: empty cloud");
  const Vec3 c = mean_of(cloud.points);
  PointCloud out = cloud;
  for (auto& p : out.points) p -= c;
  return {std::move(out), c};
}

inline PointCloud transformed(const PointCloud& cloud, const Rigid& t) {
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) out.points.push_back(t * p);
  if (cloud.has_normals()) {
    out.normals.reserve(cloud.size());
    for (const auto& n : cloud.normals) out.normals.push_back(t.linear() * n);
  }
  return out;
}

}  // namespace afford

#endif  // AFFORD_CLOUD_POINT_CLOUD_HPP
