// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_TENSOR_DESCRIPTOR_HPP
#define AFFORD_TENSOR_DESCRIPTOR_HPP

#include "afford/cloud/point_cloud.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/core/error.hpp"
#include "afford/core/log.hpp"
#include "afford/core/random.hpp"
#include "afford/tensor/bisector.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace afford {

struct AffordanceKeypoint {
  Vec3 position;
  Vec3 provenance;      // toward the generating scene point
  double weight = 0.0;  // keypoint_weight(provenance)
  int affordance_id = 0;
  int orientation_id = 0;

  friend bool operator==(const AffordanceKeypoint&, const AffordanceKeypoint&) = default;
};

/// Weight rule: the provenance magnitude, used as the scoring kernel width.
inline double keypoint_weight(const Vec3& provenance) { return provenance.norm(); }

/// Spun, zero-meaned single-affordance descriptor.
///
/// Keypoints are stored orientation-major: copy m occupies
/// [m * per_orientation, (m + 1) * per_orientation). Positions are relative
/// to the keypoint mean; `centroid_offset` is that mean expressed in the
/// anchor frame, whose origin is the scene point a detection test point
/// stands for. `object_pose` places the query object in the anchor frame.
struct AffordanceDescriptor {
  int affordance_id = 0;
  std::string label;
  std::size_t per_orientation = 0;
  int orientations = kOrientations;
  std::vector<AffordanceKeypoint> keypoints;
  Vec3 centroid_offset = Vec3::Zero();
  Rigid object_pose = Rigid::Identity();
  PointCloud query_object;
  std::string build_config;  // resolved build settings, JSON text

  /// Keypoint positions in the anchor frame.
  Vec3 anchored(const AffordanceKeypoint& k) const { return k.position + centroid_offset; }
};

enum class SamplingScheme { uniform, proximity_weighted };

inline std::string_view to_string(SamplingScheme s) {
  return s == SamplingScheme::uniform ? "uniform" : "proximity-weighted";
}

inline std::optional<SamplingScheme> scheme_from_string(std::string_view s) {
  if (s == "uniform") return SamplingScheme::uniform;
  if (s == "proximity-weighted") return SamplingScheme::proximity_weighted;
  return std::nullopt;
}

struct KeypointSample {
  std::vector<AffordanceKeypoint> keypoints;
  bool with_replacement = false;
};

namespace detail {

// Inclusion probabilities proportional to 1/|p|, capped at 1 with the
// excess redistributed over the uncapped items, summing to n.
inline std::vector<double> proximity_inclusion(std::span<const TensorPoint> tensor, std::size_t n) {
  std::vector<double> q(tensor.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = 1.0 / tensor[i].provenance.norm();
  std::vector<double> pi(q.size(), 0.0);
  std::vector<char> capped(q.size(), 0);
  std::size_t remaining = n;
  for (;;) {
    double mass = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      if (!capped[i]) mass += q[i];
    bool changed = false;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (capped[i]) continue;
      pi[i] = remaining * q[i] / mass;
      if (pi[i] >= 1.0) {
        pi[i] = 1.0;
        capped[i] = 1;
        --remaining;
        changed = true;
      }
    }
    if (!changed || remaining == 0) break;
  }
  return pi;
}

// Randomised systematic sampling: exactly n distinct items, item i included
// with probability pi[i].
inline std::vector<std::size_t> systematic_sample(const std::vector<double>& pi, std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(pi.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
  const double step = total / static_cast<double>(n);
  double next = rng.uniform() * step;
  double cum = 0.0;
  std::vector<std::size_t> chosen;
  std::vector<char> taken(pi.size(), 0);
  for (auto i : order) {
    cum += pi[i];
    while (chosen.size() < n && next < cum) {
      if (!taken[i]) {
        taken[i] = 1;
        chosen.push_back(i);
      }
      next += step;
    }
  }
  // Rounding can leave the last threshold unmatched.
  for (auto i : order) {
    if (chosen.size() >= n) break;
    if (!taken[i] && pi[i] > 0.0) {
      taken[i] = 1;
      chosen.push_back(i);
    }
  }
  return chosen;
}

}  // namespace detail

/// Draws n affordance keypoints from a tensor. Without replacement when the
/// tensor holds at least n points. Proximity weighting makes the inclusion
/// probability of each point proportional to 1/|p| (capped at 1).
inline KeypointSample sample_keypoints(std::span<const TensorPoint> tensor, std::size_t n,
                                       SamplingScheme scheme, std::uint64_t seed, int affordance_id = 0) {
  if (tensor.empty()) fail(ErrorKind::invalid_argument, "sample_keypoints: empty tensor");
  require(n >= 1, "sample_keypoints: N must be at least 1");
  Rng rng(seed);
  KeypointSample out;
  std::vector<std::size_t> chosen;

  if (tensor.size() >= n) {
    if (scheme == SamplingScheme::uniform) {
      std::vector<std::size_t> idx(tensor.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
      chosen.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
      chosen = detail::systematic_sample(detail::proximity_inclusion(tensor, n), n, rng);
    }
    std::sort(chosen.begin(), chosen.end());
  } else {
    out.with_replacement = true;
    log::info("sample_keypoints: tensor has " + std::to_string(tensor.size()) + " points, sampling " +
              std::to_string(n) + " with replacement");
    std::vector<double> cdf(tensor.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      acc += scheme == SamplingScheme::uniform ? 1.0 : 1.0 / tensor[i].provenance.norm();
      cdf[i] = acc;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double u = rng.uniform() * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      chosen.push_back(static_cast<std::size_t>(it - cdf.begin()));
    }
  }

  out.keypoints.reserve(chosen.size());
  for (auto i : chosen) {
    const auto& t = tensor[i];
    out.keypoints.push_back({t.position, t.provenance, keypoint_weight(t.provenance), affordance_id, 0});
  }
  return out;
}

/// Spins orientation-0 keypoints into `orientations` copies about +z through
/// the frame origin, then zero-means the whole set.
inline AffordanceDescriptor augment_descriptor(std::span<const AffordanceKeypoint> keypoints,
                                               int orientations = kOrientations) {
  if (keypoints.empty()) fail(ErrorKind::invalid_argument, "augment_descriptor: no keypoints");
  require(orientations >= 1, "augment_descriptor: orientation count must be positive");
  const int k = keypoints.front().affordance_id;
  for (const auto& kp : keypoints) {
    require(kp.orientation_id == 0, "augment_descriptor: input must be orientation 0");
    require(kp.affordance_id == k, "augment_descriptor: mixed affordance ids");
  }

  AffordanceDescriptor d;
  d.affordance_id = k;
  d.per_orientation = keypoints.size();
  d.orientations = orientations;
  d.keypoints.reserve(keypoints.size() * static_cast<std::size_t>(orientations));
  for (int m = 0; m < orientations; ++m) {
    const Mat3 r = orientation_rotation(m, orientations);
    for (const auto& kp : keypoints) {
      AffordanceKeypoint c = kp;
      if (m != 0) {
        c.position = r * kp.position;
        c.provenance = r * kp.provenance;
      }
      c.orientation_id = m;
      d.keypoints.push_back(c);
    }
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& kp : d.keypoints) mean += kp.position;
  mean /= static_cast<double>(d.keypoints.size());
  for (auto& kp : d.keypoints) kp.position -= mean;
  d.centroid_offset = mean;
  return d;
}

struct BuildConfig {
  std::size_t keypoints = 512;          // N per orientation
  int orientations = kOrientations;
  std::size_t tensor_samples = 2048;    // bisector samples before keypoint sampling
  SamplingScheme scheme = SamplingScheme::proximity_weighted;
  std::uint64_t seed = 7;
  double contact_bound = 0.05;          // meters
  BisectorConfig bisector;
};

/// The scene point nearest to the posed object's centroid. Detections are
/// reported at test points that play this role.
inline std::size_t anchor_index(const InteractionExample& ex) {
  const PointCloud obj = ex.placed_object();
  const SpatialIndex scene(ex.scene_patch.points);
  return scene.nearest(mean_of(obj.points)).index;
}

/// Full single-affordance pipeline: bisector -> provenance -> keypoints ->
/// spun, zero-meaned descriptor.
inline AffordanceDescriptor build_descriptor(const InteractionExample& ex, const BuildConfig& cfg = {}) {
  validate_example(ex, cfg.contact_bound);
  BisectorConfig bc = cfg.bisector;
  bc.seed = cfg.seed;
  const auto bis = compute_bisector(ex, cfg.tensor_samples, bc);
  const auto tensor = compute_provenance(bis.samples);
  if (tensor.points.empty()) fail(ErrorKind::data, "build_descriptor: bisector produced no usable samples");

  auto sample = sample_keypoints(tensor.points, cfg.keypoints, cfg.scheme, cfg.seed + 1, ex.affordance_id);
  const Vec3 anchor = ex.scene_patch.points[anchor_index(ex)];
  for (auto& kp : sample.keypoints) kp.position -= anchor;

  AffordanceDescriptor d = augment_descriptor(sample.keypoints, cfg.orientations);
  d.label = ex.label;
  d.object_pose = Eigen::Translation3d(-anchor) * ex.object_pose;
  d.query_object = ex.query_object;
  return d;
}

}  // namespace afford

#endif  // AFFORD_TENSOR_DESCRIPTOR_HPP
