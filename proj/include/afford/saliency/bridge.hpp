// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_SALIENCY_BRIDGE_HPP
#define AFFORD_SALIENCY_BRIDGE_HPP

#include "afford/agglomerate/clustering.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/core/log.hpp"
#include "afford/detect/detector.hpp"
#include "afford/detect/scoring.hpp"
#include "afford/saliency/record.hpp"
#include "afford/tensor/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace afford {

enum class FallbackStatus { ok, empty_scene, no_detections };

inline std::string_view to_string(FallbackStatus s) {
  switch (s) {
    case FallbackStatus::ok: return "ok";
    case FallbackStatus::empty_scene: return "empty_scene";
    case FallbackStatus::no_detections: return "no_detections";
  }
  return "unknown";
}

struct FallbackResult {
  SaliencyRecord record;
  FallbackStatus status = FallbackStatus::ok;
  std::optional<Detection> winner;
  std::size_t touched = 0;  // distinct scene points selected as 1-NN targets
};

/// Geometric stand-in for learned saliency. The highest-scoring detection
/// picks a test point; cells carrying any affordance detected there vote for
/// the scene point they matched, and the most-voted points are returned
/// (ties: lower scene index). Points are relative to the test point.
inline FallbackResult fallback_saliency(const PointCloud& scene, const AgglomeratedDescriptor& descriptor,
                                        double top_fraction = 0.25, const DetectorConfig& cfg = {},
                                        const std::string& scene_id = "scene") {
  require(top_fraction > 0.0 && top_fraction <= 1.0, "fallback_saliency: top_fraction must lie in (0, 1]");
  FallbackResult out;
  out.record.scene_id = scene_id;
  if (scene.empty()) {
    out.status = FallbackStatus::empty_scene;
    return out;
  }
  const auto det = detect_scene(scene, descriptor, cfg);
  if (det.detections.empty()) {
    out.status = FallbackStatus::no_detections;
    return out;
  }
  const Detection& best = det.detections.front();
  out.winner = best;
  for (const auto& d : det.detections)
    if (d.test_point_id == best.test_point_id) out.record.affordance_ids.push_back(d.affordance_id);
  std::sort(out.record.affordance_ids.begin(), out.record.affordance_ids.end());

  const SpatialIndex index(scene.points);
  const ScoringModel model = ScoringModel::from(descriptor);
  ScoreOptions opt;
  opt.search_radius = cfg.search_radius;
  const auto ps = score_at_point(index, model, best.test_point, opt, true);

  std::vector<bool> detected(model.affordance_ids().size(), false);
  for (std::size_t a = 0; a < detected.size(); ++a)
    detected[a] = std::binary_search(out.record.affordance_ids.begin(), out.record.affordance_ids.end(),
                                     model.affordance_ids()[a]);
  std::map<std::size_t, double> votes;
  for (std::size_t j = 0; j < descriptor.cells.size(); ++j) {
    if (ps.targets[j] == PointScores::npos) continue;
    const bool relevant = std::any_of(descriptor.cells[j].entries.begin(), descriptor.cells[j].entries.end(),
                                      [&](const CellEntry& e) {
                                        const auto& ids = model.affordance_ids();
                                        const auto a = std::lower_bound(ids.begin(), ids.end(), e.affordance_id) -
                                                       ids.begin();
                                        return detected[static_cast<std::size_t>(a)];
                                      });
    if (relevant) votes[ps.targets[j]] += 1.0;
  }
  std::vector<std::pair<std::size_t, double>> ranked(votes.begin(), votes.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  out.touched = ranked.size();
  const auto keep = std::min(ranked.size(), static_cast<std::size_t>(std::ceil(top_fraction * ranked.size())));
  out.record.origin = best.test_point;
  for (std::size_t i = 0; i < keep; ++i) {
    out.record.points.push_back(scene.points[ranked[i].first] - best.test_point);
    out.record.weights.push_back(ranked[i].second);
  }
  return out;
}

/// Per-cell, per-affordance projection counters. Columns follow the
/// descriptor's affordance directory.
struct ProjectionTally {
  std::vector<int> affordance_ids;
  std::size_t cells = 0;
  std::vector<double> counts;           // counts[cell * affordance_ids.size() + column]
  double projected = 0.0;               // sum of all counters
  std::map<int, std::size_t> unmatched;  // listed affordance without cells -> salient points lost

  static ProjectionTally empty_for(const AgglomeratedDescriptor& d) {
    ProjectionTally t;
    for (const auto& a : d.affordances) t.affordance_ids.push_back(a.id);
    t.cells = d.cells.size();
    t.counts.assign(t.cells * t.affordance_ids.size(), 0.0);
    return t;
  }

  std::optional<std::size_t> column(int id) const {
    const auto it = std::lower_bound(affordance_ids.begin(), affordance_ids.end(), id);
    if (it == affordance_ids.end() || *it != id) return std::nullopt;
    return static_cast<std::size_t>(it - affordance_ids.begin());
  }

  double at(std::size_t cell, int id) const {
    const auto c = column(id);
    return c ? counts[cell * affordance_ids.size() + *c] : 0.0;
  }

  double mass(int id) const {
    double s = 0.0;
    for (std::size_t j = 0; j < cells; ++j) s += at(j, id);
    return s;
  }

  ProjectionTally& operator+=(const ProjectionTally& o) {
    require(o.affordance_ids == affordance_ids && o.cells == cells, "tally: shapes differ");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
    projected += o.projected;
    for (const auto& [k, v] : o.unmatched) unmatched[k] += v;
    return *this;
  }

  friend bool operator==(const ProjectionTally&, const ProjectionTally&) = default;
};

/// Sends each salient point, once per listed affordance, to the nearest
/// cell holding entries of that affordance (ties: lower cell index). The
/// weighted form adds the activation weight instead of 1.
inline ProjectionTally backproject(const std::vector<SaliencyRecord>& records, const AgglomeratedDescriptor& d,
                                   bool weighted = false) {
  ProjectionTally t = ProjectionTally::empty_for(d);
  const std::size_t na = t.affordance_ids.size();
  std::vector<std::vector<std::size_t>> cells_of(na);
  for (std::size_t j = 0; j < d.cells.size(); ++j) {
    int last = std::numeric_limits<int>::min();
    for (const auto& e : d.cells[j].entries) {
      if (e.affordance_id == last) continue;
      last = e.affordance_id;
      if (auto c = t.column(e.affordance_id)) cells_of[*c].push_back(j);
    }
  }
  std::vector<std::optional<SpatialIndex>> index(na);
  for (std::size_t a = 0; a < na; ++a) {
    if (cells_of[a].empty()) continue;
    std::vector<Vec3> c;
    for (auto j : cells_of[a]) c.push_back(d.cells[j].centroid);
    index[a].emplace(std::move(c));
  }

  for (const auto& r : records) {
    for (int id : r.affordance_ids) {
      const auto col = t.column(id);
      if (!col || !index[*col]) {
        t.unmatched[id] += r.points.size();
        continue;
      }
      for (std::size_t i = 0; i < r.points.size(); ++i) {
        const double inc = weighted ? r.weights[i] : 1.0;
        const auto j = cells_of[*col][index[*col]->nearest(r.points[i]).index];
        t.counts[j * na + *col] += inc;
        t.projected += inc;
      }
    }
  }
  for (const auto& [id, n] : t.unmatched)
    log::warn("backproject: affordance " + std::to_string(id) + " has no cells; " + std::to_string(n) +
              " salient points not projected");
  return t;
}

/// Per-affordance cell budget: a fixed count, or the fewest top cells whose
/// tally reaches `fraction` of that affordance's mass.
struct KeepBudget {
  enum class Kind { count, mass_fraction } kind = Kind::mass_fraction;
  std::size_t count = 0;
  double fraction = 0.9;

  static KeepBudget cells(std::size_t n) { return {Kind::count, n, 0.0}; }
  static KeepBudget mass(double f) { return {Kind::mass_fraction, 0, f}; }

  void validate() const {
    if (kind == Kind::count) require(count > 0, "keep budget: cell count must be positive");
    else require(fraction > 0.0 && fraction <= 1.0, "keep budget: mass fraction must lie in (0, 1]");
  }
};

/// Cells retained for each affordance id, ascending.
inline std::map<int, std::vector<std::size_t>> select_cells(const AgglomeratedDescriptor& d,
                                                            const ProjectionTally& tally, const KeepBudget& keep) {
  keep.validate();
  require(tally.cells == d.cells.size(), "optimize_descriptor: tally was built for a different descriptor");
  std::map<int, std::vector<std::size_t>> owned;
  for (std::size_t j = 0; j < d.cells.size(); ++j) {
    int last = std::numeric_limits<int>::min();
    for (const auto& e : d.cells[j].entries) {
      if (e.affordance_id != last) owned[e.affordance_id].push_back(j);
      last = e.affordance_id;
    }
  }
  std::map<int, std::vector<std::size_t>> chosen;
  for (auto& [id, cells] : owned) {
    const double total = tally.mass(id);
    if (total <= 0.0) {
      log::warn("optimize_descriptor: affordance " + std::to_string(id) + " received no projections; kept whole");
      chosen[id] = cells;
      continue;
    }
    std::vector<std::size_t> order = cells;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return tally.at(a, id) > tally.at(b, id); });
    std::size_t n = 0;
    if (keep.kind == KeepBudget::Kind::count) {
      n = std::min(keep.count, order.size());
    } else {
      double acc = 0.0;
      while (n < order.size() && acc < keep.fraction * total * (1.0 - 1e-12)) acc += tally.at(order[n++], id);
    }
    order.resize(n);
    std::sort(order.begin(), order.end());
    chosen[id] = std::move(order);
  }
  return chosen;
}

/// Prunes every affordance to its selected cells. Surviving cells and
/// entries are copied verbatim; cells left with no entries are dropped.
inline AgglomeratedDescriptor optimize_descriptor(const AgglomeratedDescriptor& d, const ProjectionTally& tally,
                                                  const KeepBudget& keep = {}) {
  const auto chosen = select_cells(d, tally, keep);
  AgglomeratedDescriptor out = d;
  out.cells.clear();
  for (std::size_t j = 0; j < d.cells.size(); ++j) {
    Cell c;
    c.centroid = d.cells[j].centroid;
    for (const auto& e : d.cells[j].entries) {
      const auto& ids = chosen.at(e.affordance_id);
      if (std::binary_search(ids.begin(), ids.end(), j)) c.entries.push_back(e);
    }
    if (!c.entries.empty()) out.cells.push_back(std::move(c));
  }
  return out;
}

/// Variant that learns saliency per affordance: each descriptor is gridded
/// alone, tallied with the records that list it, pruned to the chosen cells'
/// member keypoints, re-centred, and the pruned set is agglomerated.
inline AgglomeratedDescriptor optimize_single(std::span<const AffordanceDescriptor> descriptors,
                                              const std::vector<SaliencyRecord>& records, double e, ClusterMode mode,
                                              const KeepBudget& keep = {}, bool weighted = false) {
  std::vector<AffordanceDescriptor> pruned;
  for (const auto& d : descriptors) {
    const auto grid = agglomerate_with_assignment(std::span(&d, 1), e, mode);
    std::vector<SaliencyRecord> mine;
    for (const auto& r : records)
      if (std::find(r.affordance_ids.begin(), r.affordance_ids.end(), d.affordance_id) != r.affordance_ids.end()) {
        mine.push_back(r);
        mine.back().affordance_ids = {d.affordance_id};
      }
    const auto tally = backproject(mine, grid.descriptor, weighted);
    const auto cells = select_cells(grid.descriptor, tally, keep).at(d.affordance_id);

    AffordanceDescriptor p = d;
    p.keypoints.clear();
    for (std::size_t i = 0; i < d.keypoints.size(); ++i)
      if (std::binary_search(cells.begin(), cells.end(), grid.assignment[i])) p.keypoints.push_back(d.keypoints[i]);
    Vec3 mean = Vec3::Zero();
    for (const auto& kp : p.keypoints) mean += kp.position;
    mean /= static_cast<double>(p.keypoints.size());
    for (auto& kp : p.keypoints) kp.position -= mean;
    p.centroid_offset += mean;
    p.per_orientation = 0;
    pruned.push_back(std::move(p));
  }
  return agglomerate(pruned, e, mode);
}

}  // namespace afford

#endif  // AFFORD_SALIENCY_BRIDGE_HPP
