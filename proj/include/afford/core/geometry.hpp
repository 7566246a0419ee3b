// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CORE_GEOMETRY_HPP
#define AFFORD_CORE_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace afford {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rigid = Eigen::Isometry3d;

/// Number of spun copies in every descriptor.
inline constexpr int kOrientations = 8;

/// Rotation about +z by `m` eighths of a turn.
inline Mat3 orientation_rotation(int m, int orientations = kOrientations) {
  if (m % orientations == 0) return Mat3::Identity();
  const double a = 2.0 * std::numbers::pi * m / orientations;
  return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
}

/// Squared distance evaluated in a fixed component order so that every
/// caller (indexes, oracles) produces bit-identical values.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

struct Box {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  bool empty() const { return (min.array() > max.array()).any(); }

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }

  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return empty() ? 0.0 : (max - min).norm(); }
};

inline Box bounding_box(std::span<const Vec3> pts) {
  Box b;
  for (const auto& p : pts) b.extend(p);
  return b;
}

inline Vec3 mean_of(std::span<const Vec3> pts) {
  Vec3 s = Vec3::Zero();
  for (const auto& p : pts) s += p;
  return pts.empty() ? s : Vec3(s / static_cast<double>(pts.size()));
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace afford

#endif  // AFFORD_CORE_GEOMETRY_HPP
