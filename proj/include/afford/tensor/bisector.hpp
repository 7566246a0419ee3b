// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_TENSOR_BISECTOR_HPP
#define AFFORD_TENSOR_BISECTOR_HPP

#include "afford/cloud/point_cloud.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/core/error.hpp"
#include "afford/core/log.hpp"
#include "afford/core/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace afford {

/// One training interaction: a query object posed against a scene patch.
struct InteractionExample {
  int affordance_id = 0;
  std::string label;          // e.g. "Place-book"
  PointCloud query_object;    // object frame
  PointCloud scene_patch;     // scene frame
  Rigid object_pose = Rigid::Identity();  // object frame -> scene frame

  PointCloud placed_object() const { return transformed(query_object, object_pose); }
};

/// Checks disjointness and that the posed object is within `contact_bound`
/// of the scene. Throws a data error otherwise.
inline void validate_example(const InteractionExample& ex, double contact_bound) {
  if (ex.query_object.empty() || ex.scene_patch.empty())
    fail(ErrorKind::data, "interaction example needs a non-empty object and scene");
  ex.query_object.validate();
  ex.scene_patch.validate();
  const PointCloud obj = ex.placed_object();
  const SpatialIndex scene(ex.scene_patch.points);
  double closest = std::numeric_limits<double>::infinity();
  for (const auto& p : obj.points) closest = std::min(closest, scene.nearest(p).distance);
  if (closest == 0.0) fail(ErrorKind::data, "object and scene share coordinates");
  if (closest >= contact_bound)
    fail(ErrorKind::data, "object is " + std::to_string(closest) + " m from the scene, beyond the contact bound");
}

/// A point on the object/scene bisector together with the nearest point of
/// each cloud.
struct BisectorSample {
  Vec3 position;
  Vec3 scene_point;
  Vec3 object_point;
};

struct BisectorConfig {
  double tolerance = 0.002;      // meters; |d(scene) - d(object)| bound
  double region_radius = 0.0;    // scene points farther than this from the object are ignored; 0 = object diameter
  std::size_t attempts_per_sample = 20;
  std::uint64_t seed = 1;
};

struct BisectorResult {
  std::vector<BisectorSample> samples;
  std::size_t requested = 0;

  bool complete() const { return samples.size() >= requested; }
};

/// Samples the bisector surface between the posed object and the scene.
///
/// Each candidate comes from a segment joining an object point to a scene
/// point in the interaction region (the object point's nearest scene point a
/// quarter of the time). Along the segment f = d(scene) - d(object) goes from
/// positive to negative, so bisection finds a zero crossing; the crossing is
/// accepted once |f| falls within a quarter of the tolerance.
inline BisectorResult compute_bisector(const InteractionExample& ex, std::size_t samples,
                                       const BisectorConfig& cfg = {}) {
  if (ex.query_object.empty() || ex.scene_patch.empty())
    fail(ErrorKind::invalid_argument, "compute_bisector: object and scene must be non-empty");
  require(cfg.tolerance > 0.0, "compute_bisector: tolerance must be positive");

  const PointCloud obj = ex.placed_object();
  const auto& scene = ex.scene_patch.points;
  const SpatialIndex obj_index(obj.points);
  const SpatialIndex scene_index(scene);

  std::vector<std::size_t> cross(obj.size());
  for (std::size_t i = 0; i < obj.size(); ++i) {
    const auto nn = scene_index.nearest(obj.points[i]);
    if (nn.distance == 0.0)
      fail(ErrorKind::invalid_argument, "compute_bisector: object and scene overlap (shared point)");
    cross[i] = nn.index;
  }

  const double radius = cfg.region_radius > 0.0 ? cfg.region_radius : bounding_box(obj.points).diagonal();
  std::vector<char> in_region(scene.size(), 0);
  for (std::size_t i = 0; i < scene.size(); ++i)
    in_region[i] = obj_index.nearest(scene[i]).distance <= radius;
  for (auto c : cross) in_region[c] = 1;
  std::vector<std::size_t> region;
  for (std::size_t i = 0; i < scene.size(); ++i)
    if (in_region[i]) region.push_back(i);

  BisectorResult result;
  result.requested = samples;
  result.samples.reserve(samples);
  Rng rng(cfg.seed);
  const std::size_t max_attempts = samples * std::max<std::size_t>(1, cfg.attempts_per_sample);
  const double accept = 0.25 * cfg.tolerance;

  for (std::size_t attempt = 0; attempt < max_attempts && result.samples.size() < samples; ++attempt) {
    const std::size_t oi = rng.below(obj.size());
    const std::size_t si = rng.uniform() < 0.25 ? cross[oi] : region[rng.below(region.size())];
    const Vec3 a = obj.points[oi];
    const Vec3 b = scene[si];
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 64; ++it) {
      const double t = 0.5 * (lo + hi);
      const Vec3 x = a + t * (b - a);
      const auto ns = scene_index.nearest(x);
      const auto no = obj_index.nearest(x);
      const double f = ns.distance - no.distance;
      if (std::abs(f) <= accept) {
        result.samples.push_back({x, scene[ns.index], obj.points[no.index]});
        break;
      }
      (f > 0.0 ? lo : hi) = t;
    }
  }
  if (!result.complete())
    log::warn("compute_bisector: found " + std::to_string(result.samples.size()) + " of " +
              std::to_string(samples) + " requested samples");
  return result;
}

/// Bisector point paired with its provenance vector (toward the scene).
struct TensorPoint {
  Vec3 position;
  Vec3 provenance;
};

struct ProvenanceResult {
  std::vector<TensorPoint> points;
  std::size_t dropped = 0;
};

inline ProvenanceResult compute_provenance(std::span<const BisectorSample> samples) {
  ProvenanceResult r;
  r.points.reserve(samples.size());
  for (const auto& s : samples) {
    const Vec3 p = s.scene_point - s.position;
    if (p.norm() <= 0.0) {
      ++r.dropped;
      continue;
    }
    r.points.push_back({s.position, p});
  }
  if (r.dropped)
    log::warn("compute_provenance: dropped " + std::to_string(r.dropped) + " zero-length provenance vectors");
  return r;
}

}  // namespace afford

#endif  // AFFORD_TENSOR_BISECTOR_HPP
