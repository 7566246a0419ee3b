// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_AGGLOMERATE_CLUSTERING_HPP
#define AFFORD_AGGLOMERATE_CLUSTERING_HPP

#include "afford/cloud/point_cloud.hpp"
#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"
#include "afford/tensor/descriptor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace afford {

enum class ClusterMode {
  closest_per_affordance,  // one kept keypoint per (affordance, orientation) per cell
  all,                     // keep every member ("iT-All")
};

inline std::string_view to_string(ClusterMode m) {
  return m == ClusterMode::all ? "all" : "closest";
}

inline std::optional<ClusterMode> cluster_mode_from_string(std::string_view s) {
  if (s == "closest" || s == "closest-per-affordance") return ClusterMode::closest_per_affordance;
  if (s == "all") return ClusterMode::all;
  return std::nullopt;
}

/// Cell sizes evaluated for the agglomerated representation.
inline constexpr double kCellSizeFine = 0.005;
inline constexpr double kCellSizeCoarse = 0.01;

/// Uniform seed grid: seed (i,j,k) sits at origin + (idx + 0.5) * e.
/// Seeds are ordered by their linear index (x-major).
struct GridSpec {
  Vec3 origin = Vec3::Zero();
  double cell_size = 0.0;
  std::array<std::int64_t, 3> dims{0, 0, 0};

  /// Grid spanning [min, max] of `pts`, anchored at the minimum corner.
  static GridSpec covering(std::span<const Vec3> pts, double e) {
    GridSpec g;
    g.cell_size = e;
    const Box box = bounding_box(pts);
    g.origin = box.min;
    for (int a = 0; a < 3; ++a)
      g.dims[a] = static_cast<std::int64_t>(std::floor((box.max[a] - box.min[a]) / e)) + 1;
    return g;
  }

  std::int64_t linear(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (i * dims[1] + j) * dims[2] + k;
  }

  Vec3 seed(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return {origin.x() + (static_cast<double>(i) + 0.5) * cell_size,
            origin.y() + (static_cast<double>(j) + 0.5) * cell_size,
            origin.z() + (static_cast<double>(k) + 0.5) * cell_size};
  }
};

struct KeptKeypoint {
  Vec3 position;
  Vec3 provenance;
  double weight = 0.0;

  friend bool operator==(const KeptKeypoint&, const KeptKeypoint&) = default;
};

struct CellEntry {
  int affordance_id = 0;
  int orientation_id = 0;
  std::uint32_t member_count = 0;  // keypoints of this (affordance, orientation) that fell in the cell
  std::vector<KeptKeypoint> kept;

  friend bool operator==(const CellEntry&, const CellEntry&) = default;
};

struct Cell {
  Vec3 centroid = Vec3::Zero();
  std::vector<CellEntry> entries;  // sorted by (affordance_id, orientation_id)

  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Directory record for one affordance in an agglomerated descriptor.
struct AffordanceInfo {
  int id = 0;
  std::string label;
  Vec3 centroid_offset = Vec3::Zero();
  Rigid object_pose = Rigid::Identity();  // query object in the anchor frame
  std::uint64_t source_keypoints = 0;
  PointCloud query_object;

  friend bool operator==(const AffordanceInfo& a, const AffordanceInfo& b) {
    return a.id == b.id && a.label == b.label && a.centroid_offset == b.centroid_offset &&
           a.object_pose.matrix() == b.object_pose.matrix() && a.source_keypoints == b.source_keypoints &&
           a.query_object == b.query_object;
  }
};

/// Multi-affordance descriptor in the anchor frame: the origin is placed on
/// a scene test point at detection time.
struct AgglomeratedDescriptor {
  double cell_size = 0.0;
  ClusterMode mode = ClusterMode::closest_per_affordance;
  int orientations = kOrientations;
  std::vector<Cell> cells;
  std::vector<AffordanceInfo> affordances;  // sorted by id
  std::string build_config;                 // resolved config, JSON text

  const AffordanceInfo* find(int id) const {
    auto it = std::lower_bound(affordances.begin(), affordances.end(), id,
                               [](const AffordanceInfo& a, int v) { return a.id < v; });
    return it != affordances.end() && it->id == id ? &*it : nullptr;
  }

  std::size_t kept_count() const {
    std::size_t n = 0;
    for (const auto& c : cells)
      for (const auto& e : c.entries) n += e.kept.size();
    return n;
  }

  std::size_t member_count() const {
    std::size_t n = 0;
    for (const auto& c : cells)
      for (const auto& e : c.entries) n += e.member_count;
    return n;
  }

  friend bool operator==(const AgglomeratedDescriptor& a, const AgglomeratedDescriptor& b) {
    return a.cell_size == b.cell_size && a.mode == b.mode && a.orientations == b.orientations &&
           a.cells == b.cells && a.affordances == b.affordances && a.build_config == b.build_config;
  }
};

struct ClusterResult {
  AgglomeratedDescriptor descriptor;
  std::vector<std::size_t> assignment;  // input keypoint -> output cell
};

/// Grid clustering of affordance keypoints.
///
/// 1. Seed centroids on a uniform grid over the keypoint bounding box.
/// 2. Assign every keypoint to its nearest seed (ties: lowest seed index).
/// 3. Drop seeds that received nothing.
/// 4. Per (affordance, orientation) in each cell keep the keypoint closest
///    to the seed (ties: lowest keypoint index), or all of them in `all` mode.
/// 5. Move each centroid to the mean of its kept keypoints, once.
inline ClusterResult cluster_keypoints(std::span<const AffordanceKeypoint> kps, double e, ClusterMode mode,
                                       std::optional<GridSpec> grid_override = std::nullopt) {
  require(e > 0.0 && std::isfinite(e), "agglomerate: cell size must be positive");
  ClusterResult out;
  out.descriptor.cell_size = e;
  out.descriptor.mode = mode;
  if (kps.empty()) return out;

  std::vector<Vec3> pos(kps.size());
  for (std::size_t i = 0; i < kps.size(); ++i) pos[i] = kps[i].position;
  GridSpec g = grid_override ? *grid_override : GridSpec::covering(pos, e);
  g.cell_size = e;
  if (grid_override) {
    // Grow the grid so that it covers every keypoint.
    for (int a = 0; a < 3; ++a) {
      double hi = -std::numeric_limits<double>::infinity();
      for (const auto& p : pos) {
        require(p[a] >= g.origin[a], "agglomerate: grid origin must not exceed keypoint minimum");
        hi = std::max(hi, p[a]);
      }
      g.dims[a] = std::max(g.dims[a], static_cast<std::int64_t>(std::floor((hi - g.origin[a]) / e)) + 1);
    }
  }

  // Nearest seed: the containing cell or one of its neighbours.
  std::vector<std::pair<std::int64_t, std::size_t>> assigned(kps.size());
  std::vector<std::array<std::int64_t, 3>> key_of_linear;
  for (std::size_t i = 0; i < kps.size(); ++i) {
    std::array<std::int64_t, 3> base{};
    for (int a = 0; a < 3; ++a) {
      auto c = static_cast<std::int64_t>(std::floor((pos[i][a] - g.origin[a]) / e));
      base[a] = std::clamp<std::int64_t>(c, 0, g.dims[a] - 1);
    }
    double best = std::numeric_limits<double>::infinity();
    std::int64_t best_lin = std::numeric_limits<std::int64_t>::max();
    for (std::int64_t di = -1; di <= 1; ++di) {
      const auto ii = base[0] + di;
      if (ii < 0 || ii >= g.dims[0]) continue;
      for (std::int64_t dj = -1; dj <= 1; ++dj) {
        const auto jj = base[1] + dj;
        if (jj < 0 || jj >= g.dims[1]) continue;
        for (std::int64_t dk = -1; dk <= 1; ++dk) {
          const auto kk = base[2] + dk;
          if (kk < 0 || kk >= g.dims[2]) continue;
          const double d2 = squared_distance(pos[i], g.seed(ii, jj, kk));
          const auto lin = g.linear(ii, jj, kk);
          if (d2 < best || (d2 == best && lin < best_lin)) {
            best = d2;
            best_lin = lin;
          }
        }
      }
    }
    assigned[i] = {best_lin, i};
  }
  std::sort(assigned.begin(), assigned.end());

  auto& cells = out.descriptor.cells;
  out.assignment.assign(kps.size(), 0);
  std::vector<std::size_t> members;
  for (std::size_t b = 0; b < assigned.size();) {
    std::size_t end = b;
    while (end < assigned.size() && assigned[end].first == assigned[b].first) ++end;
    const auto lin = assigned[b].first;
    const std::int64_t k = lin % g.dims[2];
    const std::int64_t j = (lin / g.dims[2]) % g.dims[1];
    const std::int64_t i = lin / (g.dims[2] * g.dims[1]);
    const Vec3 seed = g.seed(i, j, k);

    members.clear();
    for (std::size_t m = b; m < end; ++m) {
      members.push_back(assigned[m].second);
      out.assignment[assigned[m].second] = cells.size();
    }
    std::stable_sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
      return std::pair(kps[x].affordance_id, kps[x].orientation_id) <
             std::pair(kps[y].affordance_id, kps[y].orientation_id);
    });

    Cell cell;
    Vec3 sum = Vec3::Zero();
    std::size_t kept = 0;
    for (std::size_t g0 = 0; g0 < members.size();) {
      std::size_t g1 = g0;
      const auto& first = kps[members[g0]];
      while (g1 < members.size() && kps[members[g1]].affordance_id == first.affordance_id &&
             kps[members[g1]].orientation_id == first.orientation_id)
        ++g1;
      CellEntry entry;
      entry.affordance_id = first.affordance_id;
      entry.orientation_id = first.orientation_id;
      entry.member_count = static_cast<std::uint32_t>(g1 - g0);
      auto keep = [&](std::size_t idx) {
        entry.kept.push_back({kps[idx].position, kps[idx].provenance, kps[idx].weight});
        sum += kps[idx].position;
        ++kept;
      };
      if (mode == ClusterMode::all) {
        for (std::size_t m = g0; m < g1; ++m) keep(members[m]);
      } else {
        std::size_t arg = members[g0];
        double best = squared_distance(kps[arg].position, seed);
        for (std::size_t m = g0 + 1; m < g1; ++m) {
          const double d2 = squared_distance(kps[members[m]].position, seed);
          if (d2 < best) {  // members are in index order, so ties keep the lower index
            best = d2;
            arg = members[m];
          }
        }
        keep(arg);
      }
      cell.entries.push_back(std::move(entry));
      g0 = g1;
    }
    cell.centroid = sum / static_cast<double>(kept);
    cells.push_back(std::move(cell));
    b = end;
  }
  return out;
}

inline constexpr double kZeroMeanTolerance = 1e-6;

/// Builds the multi-affordance descriptor. Inputs must be zero-meaned; each
/// is placed in the shared anchor frame by its recorded centroid offset
/// before clustering.
inline ClusterResult agglomerate_with_assignment(std::span<const AffordanceDescriptor> descriptors, double e,
                                                 ClusterMode mode) {
  if (descriptors.empty()) fail(ErrorKind::invalid_argument, "agglomerate: no descriptors");
  std::vector<AffordanceKeypoint> all;
  std::vector<AffordanceInfo> dir;
  int orientations = descriptors.front().orientations;
  for (const auto& d : descriptors) {
    if (d.keypoints.empty()) fail(ErrorKind::invalid_argument, "agglomerate: descriptor without keypoints");
    Vec3 mean = Vec3::Zero();
    for (const auto& kp : d.keypoints) mean += kp.position;
    mean /= static_cast<double>(d.keypoints.size());
    if (mean.norm() > kZeroMeanTolerance)
      fail(ErrorKind::invalid_argument, "agglomerate: descriptor '" + d.label + "' is not zero-meaned");
    require(d.orientations == orientations, "agglomerate: descriptors disagree on orientation count");
    for (const auto& info : dir)
      if (info.id == d.affordance_id)
        fail(ErrorKind::invalid_argument, "agglomerate: duplicate affordance id " + std::to_string(d.affordance_id));
    for (const auto& kp : d.keypoints) {
      require(kp.affordance_id == d.affordance_id, "agglomerate: keypoint affordance id mismatch");
      AffordanceKeypoint a = kp;
      a.position = d.anchored(kp);
      all.push_back(a);
    }
    dir.push_back({d.affordance_id, d.label, d.centroid_offset, d.object_pose, d.keypoints.size(), d.query_object});
  }
  std::sort(dir.begin(), dir.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  ClusterResult r = cluster_keypoints(all, e, mode);
  r.descriptor.affordances = std::move(dir);
  r.descriptor.orientations = orientations;
  return r;
}

inline AgglomeratedDescriptor agglomerate(std::span<const AffordanceDescriptor> descriptors, double e,
                                          ClusterMode mode = ClusterMode::closest_per_affordance) {
  return agglomerate_with_assignment(descriptors, e, mode).descriptor;
}

}  // namespace afford

#endif  // AFFORD_AGGLOMERATE_CLUSTERING_HPP
