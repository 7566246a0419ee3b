// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_DETECT_SCORING_HPP
#define AFFORD_DETECT_SCORING_HPP

#include "afford/agglomerate/clustering.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"
#include "afford/tensor/descriptor.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace afford {

/// Relative disagreement |v - p| / |p| between a test vector and a
/// provenance vector.
inline double relative_deviation(const Vec3& test_vector, const Vec3& provenance) {
  return (test_vector - provenance).norm() / provenance.norm();
}

/// Peak-normalised Gaussian agreement with standard deviation `weight`
/// (meters) over the deviation |v - p|. With the default weight |p| this is
/// exp(-delta^2 / 2) in terms of the relative deviation.
inline double score_contribution(const Vec3& test_vector, const Vec3& provenance, double weight) {
  return std::exp(-(test_vector - provenance).squaredNorm() / (2.0 * weight * weight));
}

/// Flattened, query-ready form of a descriptor. Each record belongs to one
/// cell and one score slot (affordance index * orientations + orientation).
class ScoringModel {
public:
  struct Record {
    Vec3 provenance;
    double inv_two_w2 = 0.0;  // 1 / (2 w^2)
    std::uint32_t slot = 0;
  };

  static ScoringModel from(const AgglomeratedDescriptor& d) {
    ScoringModel m;
    m.orientations_ = d.orientations;
    for (const auto& a : d.affordances) m.affordance_ids_.push_back(a.id);
    m.slot_count_.assign(m.affordance_ids_.size() * static_cast<std::size_t>(m.orientations_), 0.0);
    m.cell_begin_.push_back(0);
    for (const auto& cell : d.cells) {
      m.centroids_.push_back(cell.centroid);
      m.support_.extend(cell.centroid);
      for (const auto& e : cell.entries) {
        const auto slot = m.slot_of(e.affordance_id, e.orientation_id);
        for (const auto& k : e.kept) {
          m.add_record(k.provenance, k.weight, slot);
          m.support_.extend(k.position + k.provenance);
        }
      }
      m.cell_begin_.push_back(static_cast<std::uint32_t>(m.records_.size()));
    }
    return m;
  }

  /// Raw single-affordance form: every keypoint is its own cell and its test
  /// vector starts at the keypoint itself.
  static ScoringModel from(const AffordanceDescriptor& d) {
    ScoringModel m;
    m.orientations_ = d.orientations;
    m.affordance_ids_.push_back(d.affordance_id);
    m.slot_count_.assign(static_cast<std::size_t>(m.orientations_), 0.0);
    m.cell_begin_.push_back(0);
    for (const auto& kp : d.keypoints) {
      const Vec3 x = d.anchored(kp);
      m.centroids_.push_back(x);
      m.support_.extend(x);
      m.support_.extend(x + kp.provenance);
      m.add_record(kp.provenance, kp.weight, static_cast<std::uint32_t>(kp.orientation_id));
      m.cell_begin_.push_back(static_cast<std::uint32_t>(m.records_.size()));
    }
    return m;
  }

  std::size_t cell_count() const { return centroids_.size(); }
  std::size_t record_count() const { return records_.size(); }
  int orientations() const { return orientations_; }
  const std::vector<int>& affordance_ids() const { return affordance_ids_; }
  std::size_t slot_count() const { return slot_count_.size(); }
  const Box& support() const { return support_; }
  const std::vector<Vec3>& centroids() const { return centroids_; }

  std::span<const Record> records_of(std::size_t cell) const {
    return {records_.data() + cell_begin_[cell], records_.data() + cell_begin_[cell + 1]};
  }
  double records_in_slot(std::size_t slot) const { return slot_count_[slot]; }

  std::uint32_t slot_of(int affordance_id, int orientation) const {
    for (std::size_t a = 0; a < affordance_ids_.size(); ++a)
      if (affordance_ids_[a] == affordance_id)
        return static_cast<std::uint32_t>(a * static_cast<std::size_t>(orientations_) + orientation);
    fail(ErrorKind::invalid_argument, "scoring: affordance " + std::to_string(affordance_id) + " not in directory");
  }

private:
  void add_record(const Vec3& p, double w, std::uint32_t slot) {
    require(w > 0.0, "scoring: keypoint weight must be positive");
    records_.push_back({p, 1.0 / (2.0 * w * w), slot});
    slot_count_[slot] += 1.0;
  }

  int orientations_ = kOrientations;
  std::vector<int> affordance_ids_;
  std::vector<Vec3> centroids_;
  std::vector<std::uint32_t> cell_begin_;
  std::vector<Record> records_;
  std::vector<double> slot_count_;
  Box support_;
};

struct ScoreOptions {
  double search_radius = 0.0;  // 0: half the diagonal of the descriptor support box
};

/// Per-slot scores at one test point. `targets[j]` is the scene index that
/// cell j matched, or npos when its neighbourhood was empty.
struct PointScores {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::vector<double> scores;
  std::vector<std::size_t> targets;
};

/// Scores every (affordance, orientation) slot with the descriptor origin
/// placed at `t`. Test vectors come from a 1-NN search restricted to the
/// search region around the aligned descriptor; cells with no scene point in
/// that region contribute 0. Each slot averages over all of its records.
inline PointScores score_at_point(const SpatialIndex& scene, const ScoringModel& model, const Vec3& t,
                                  const ScoreOptions& opt = {}, bool want_targets = false) {
  PointScores out;
  out.scores.assign(model.slot_count(), 0.0);
  if (want_targets) out.targets.assign(model.cell_count(), PointScores::npos);
  if (scene.empty() || model.cell_count() == 0) return out;

  const Box& sup = model.support();
  const Vec3 center = t + sup.center();
  const double radius = opt.search_radius > 0.0 ? opt.search_radius : 0.5 * sup.diagonal();
  const double r2 = radius * radius;
  const auto& pts = scene.points();
  // Region points are gathered lazily; the unrestricted 1-NN is the answer
  // whenever it lies inside the region.
  std::vector<std::size_t> region;
  bool region_ready = false;

  std::vector<double> acc(model.slot_count(), 0.0);
  const auto& centroids = model.centroids();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const Vec3 q = t + centroids[j];
    std::size_t hit = scene.nearest(q).index;
    if (squared_distance(pts[hit], center) > r2) {
      if (!region_ready) {
        for (const auto& n : scene.radius(center, radius)) region.push_back(n.index);
        region_ready = true;
      }
      if (region.empty()) break;
      hit = region.front();
      double best = squared_distance(pts[hit], q);
      for (auto i : region) {
        const double d2 = squared_distance(pts[i], q);
        if (d2 < best) {
          best = d2;
          hit = i;
        }
      }
    }
    const Vec3 v = pts[hit] - q;
    if (want_targets) out.targets[j] = hit;
    for (const auto& r : model.records_of(j)) acc[r.slot] += std::exp(-(v - r.provenance).squaredNorm() * r.inv_two_w2);
  }
  for (std::size_t s = 0; s < acc.size(); ++s) {
    const double n = model.records_in_slot(s);
    out.scores[s] = n > 0.0 ? std::min(1.0, acc[s] / n) : 0.0;
  }
  return out;
}

}  // namespace afford

#endif  // AFFORD_DETECT_SCORING_HPP
