// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CLOUD_VOXEL_GRID_HPP
#define AFFORD_CLOUD_VOXEL_GRID_HPP

#include "afford/cloud/point_cloud.hpp"
#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace afford {

using CellKey = std::array<std::int64_t, 3>;

inline CellKey cell_of(const Vec3& p, const Vec3& origin, double e) {
  return {static_cast<std::int64_t>(std::floor((p.x() - origin.x()) / e)),
          static_cast<std::int64_t>(std::floor((p.y() - origin.y()) / e)),
          static_cast<std::int64_t>(std::floor((p.z() - origin.z()) / e))};
}

/// Sparse uniform grid: only occupied cells are stored, keyed by integer
/// cell coordinates in lexicographic order.
struct VoxelGrid {
  double cell_size = 0.0;
  Vec3 origin = Vec3::Zero();
  std::map<CellKey, std::vector<std::size_t>> cells;

  /// `origin` defaults to the minimum corner of the cloud's bounding box.
  static VoxelGrid build(const PointCloud& cloud, double e,
                         std::optional<Vec3> origin = std::nullopt) {
    if (!(e > 0.0) || !std::isfinite(e))
      fail(ErrorKind::invalid_argument, "voxel cell size must be positive");
    VoxelGrid g;
    g.cell_size = e;
    if (cloud.empty()) return g;
    g.origin = origin ? *origin : bounding_box(cloud.points).min;
    for (std::size_t i = 0; i < cloud.size(); ++i)
      g.cells[cell_of(cloud.points[i], g.origin, e)].push_back(i);
    return g;
  }

  std::size_t occupied() const { return cells.size(); }
};

/// One point per occupied cell, at the centroid of its members. Normals are
/// not carried over.
inline PointCloud voxel_downsample(const PointCloud& cloud, double e,
                                   std::optional<Vec3> origin = std::nullopt) {
  const VoxelGrid grid = VoxelGrid::build(cloud, e, origin);
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.points.reserve(grid.occupied());
  for (const auto& [key, members] : grid.cells) {
    Vec3 s = Vec3::Zero();
    for (auto i : members) s += cloud.points[i];
    out.points.push_back(s / static_cast<double>(members.size()));
  }
  return out;
}

}  // namespace afford

#endif  // AFFORD_CLOUD_VOXEL_GRID_HPP
