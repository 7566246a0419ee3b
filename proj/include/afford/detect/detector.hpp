// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_DETECT_DETECTOR_HPP
#define AFFORD_DETECT_DETECTOR_HPP

#include "afford/agglomerate/clustering.hpp"
#include "afford/cloud/point_cloud.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/cloud/voxel_grid.hpp"
#include "afford/core/error.hpp"
#include "afford/core/log.hpp"
#include "afford/core/random.hpp"
#include "afford/detect/scoring.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace afford {

enum class Pipeline { agglomeration, saliency };

inline std::string_view to_string(Pipeline p) { return p == Pipeline::saliency ? "saliency" : "agglomeration"; }

inline std::optional<Pipeline> pipeline_from_string(std::string_view s) {
  if (s == "agglomeration") return Pipeline::agglomeration;
  if (s == "saliency") return Pipeline::saliency;
  return std::nullopt;
}

/// Acceptance threshold for each pipeline.
inline double default_threshold(Pipeline p) { return p == Pipeline::saliency ? 0.5 : 0.7; }

struct DetectorConfig {
  Pipeline pipeline = Pipeline::agglomeration;
  std::optional<double> threshold;         // overrides the pipeline default
  std::size_t test_points = 0;             // 0: derived from scene area and density
  double test_point_density = 2500.0;      // per square meter of occupied surface
  bool exhaustive = false;                 // every scene point becomes a test point
  double search_radius = 0.0;              // meters; 0: half the descriptor support diagonal
  std::uint64_t seed = 1;
  unsigned threads = 1;

  double effective_threshold() const { return threshold ? *threshold : default_threshold(pipeline); }

  void validate() const {
    const double t = effective_threshold();
    require(t >= 0.0 && t <= 1.0, "detector: threshold must lie in [0, 1]");
    require(test_point_density > 0.0, "detector: test-point density must be positive");
    require(search_radius >= 0.0, "detector: search radius must be non-negative");
    require(threads >= 1, "detector: need at least one worker thread");
  }
};

/// Scene area estimate: occupied 1 cm voxels times the voxel face area.
inline double surface_area(const PointCloud& scene) {
  if (scene.empty()) return 0.0;
  constexpr double e = 0.01;
  return static_cast<double>(VoxelGrid::build(scene, e).occupied()) * e * e;
}

/// Indices of `n` distinct scene points drawn uniformly. Asking for more
/// points than the scene holds returns the whole scene (permuted).
inline std::vector<std::size_t> sample_test_point_indices(const PointCloud& scene, std::size_t n, std::uint64_t seed) {
  if (scene.empty()) fail(ErrorKind::invalid_argument, "sample_test_points: empty scene");
  if (n > scene.size()) {
    log::info("sample_test_points: " + std::to_string(n) + " requested from " + std::to_string(scene.size()) +
              " scene points; using every point");
    n = scene.size();
  }
  std::vector<std::size_t> idx(scene.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(n);
  return idx;
}

inline std::vector<Vec3> sample_test_points(const PointCloud& scene, std::size_t n, std::uint64_t seed) {
  std::vector<Vec3> out;
  for (auto i : sample_test_point_indices(scene, n, seed)) out.push_back(scene.points[i]);
  return out;
}

/// Test-point indices for a scene under `cfg`, in evaluation order.
inline std::vector<std::size_t> plan_test_points(const PointCloud& scene, const DetectorConfig& cfg) {
  if (scene.empty()) return {};
  if (cfg.exhaustive) {
    std::vector<std::size_t> all(scene.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  std::size_t n = cfg.test_points;
  if (n == 0) n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(surface_area(scene) * cfg.test_point_density)));
  return sample_test_point_indices(scene, n, cfg.seed);
}

struct Detection {
  std::size_t test_point_id = 0;  // position in the evaluated test-point list
  std::size_t scene_index = 0;    // scene point used as the test point
  Vec3 test_point = Vec3::Zero();
  int affordance_id = 0;
  std::string label;
  int orientation_id = 0;
  double score = 0.0;
  Rigid object_pose = Rigid::Identity();  // query object frame -> scene frame
};

/// Query object pose for a detection: descriptor origin on the test point,
/// rotated into the winning orientation bin.
inline Rigid detection_pose(const AffordanceInfo& info, const Vec3& test_point, int orientation, int orientations) {
  return Eigen::Translation3d(test_point) * Rigid(orientation_rotation(orientation, orientations)) * info.object_pose;
}

struct DetectionResult {
  std::vector<Detection> detections;       // sorted by score, descending
  std::vector<std::size_t> test_points;    // scene indices, evaluation order
  double threshold = 0.0;
  double seconds = 0.0;                    // wall time spent scoring
};

namespace detail {

// Best bin per affordance at one test point; ties go to the lowest bin.
inline void collect(const ScoringModel& model, const AgglomeratedDescriptor& d, const PointScores& ps,
                    std::size_t tp_id, std::size_t scene_index, const Vec3& t, double threshold,
                    std::vector<Detection>& out) {
  const int no = model.orientations();
  const auto& ids = model.affordance_ids();
  for (std::size_t a = 0; a < ids.size(); ++a) {
    int best = 0;
    for (int o = 1; o < no; ++o)
      if (ps.scores[a * no + o] > ps.scores[a * no + best]) best = o;
    const double s = ps.scores[a * no + best];
    if (s < threshold) continue;
    const auto* info = d.find(ids[a]);
    Detection det;
    det.test_point_id = tp_id;
    det.scene_index = scene_index;
    det.test_point = t;
    det.affordance_id = ids[a];
    det.label = info ? info->label : std::string();
    det.orientation_id = best;
    det.score = s;
    if (info) det.object_pose = detection_pose(*info, t, best, no);
    out.push_back(std::move(det));
  }
}

inline void sort_detections(std::vector<Detection>& v) {
  std::sort(v.begin(), v.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.test_point_id != b.test_point_id) return a.test_point_id < b.test_point_id;
    return a.affordance_id < b.affordance_id;
  });
}

}  // namespace detail

/// Scores every affordance at each planned test point and keeps the
/// (test point, affordance) pairs whose best orientation reaches the
/// threshold. Output is identical for any thread count.
inline DetectionResult detect_scene(const PointCloud& scene, const AgglomeratedDescriptor& descriptor,
                                    const DetectorConfig& cfg = {},
                                    std::optional<std::vector<std::size_t>> test_points = std::nullopt) {
  cfg.validate();
  DetectionResult res;
  res.threshold = cfg.effective_threshold();
  if (scene.empty() || descriptor.cells.empty()) return res;
  res.test_points = test_points ? std::move(*test_points) : plan_test_points(scene, cfg);

  const auto start = std::chrono::steady_clock::now();
  const SpatialIndex index(scene.points);
  const ScoringModel model = ScoringModel::from(descriptor);
  ScoreOptions opt;
  opt.search_radius = cfg.search_radius;

  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(res.test_points.size())));
  std::vector<std::vector<Detection>> parts(workers);
  auto run = [&](unsigned w) {
    for (std::size_t i = w; i < res.test_points.size(); i += workers) {
      const auto si = res.test_points[i];
      require(si < scene.size(), "detect_scene: test point index out of range");
      const Vec3& t = scene.points[si];
      detail::collect(model, descriptor, score_at_point(index, model, t, opt), i, si, t, res.threshold, parts[w]);
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }
  for (auto& p : parts) res.detections.insert(res.detections.end(), p.begin(), p.end());
  detail::sort_detections(res.detections);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct BenchmarkReport {
  std::size_t test_points = 0;
  std::size_t affordances = 0;
  std::size_t agglomerated_centroids = 0;
  std::size_t agglomerated_keypoints = 0;  // kept keypoints (score records)
  std::size_t individual_keypoints = 0;    // sum over the per-affordance descriptors
  double agglomerated_ms = 0.0;            // mean per test point
  double individual_ms = 0.0;              // mean per test point, all affordances in sequence
  double score_checksum = 0.0;             // sum of first-slot scores over both runs
  double speedup() const { return agglomerated_ms > 0.0 ? individual_ms / agglomerated_ms : 0.0; }
};

/// Times one agglomerated query against sequential per-affordance queries
/// at the same test points. Both forms must cover the same affordance ids.
inline BenchmarkReport benchmark(const PointCloud& scene, const AgglomeratedDescriptor& agglomerated,
                                 std::span<const AffordanceDescriptor> individual,
                                 const std::vector<Vec3>& test_points, double search_radius = 0.0) {
  std::vector<int> a_ids;
  for (const auto& a : agglomerated.affordances) a_ids.push_back(a.id);
  std::vector<int> i_ids;
  for (const auto& d : individual) i_ids.push_back(d.affordance_id);
  std::sort(i_ids.begin(), i_ids.end());
  if (a_ids != i_ids) fail(ErrorKind::invalid_argument, "benchmark: descriptor forms cover different affordances");
  if (test_points.empty()) fail(ErrorKind::invalid_argument, "benchmark: no test points");

  BenchmarkReport r;
  r.test_points = test_points.size();
  r.affordances = a_ids.size();
  r.agglomerated_centroids = agglomerated.cells.size();
  r.agglomerated_keypoints = agglomerated.kept_count();
  for (const auto& d : individual) r.individual_keypoints += d.keypoints.size();

  const SpatialIndex index(scene.points);
  ScoreOptions opt;
  opt.search_radius = search_radius;
  const auto agg = ScoringModel::from(agglomerated);
  std::vector<ScoringModel> singles;
  for (const auto& d : individual) singles.push_back(ScoringModel::from(d));

  double sum = 0.0;
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& t : test_points) sum += score_at_point(index, agg, t, opt).scores.front();
  auto t1 = std::chrono::steady_clock::now();
  for (const auto& t : test_points)
    for (const auto& m : singles) sum += score_at_point(index, m, t, opt).scores.front();
  auto t2 = std::chrono::steady_clock::now();
  const double n = static_cast<double>(test_points.size());
  r.score_checksum = sum;
  r.agglomerated_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / n;
  r.individual_ms = std::chrono::duration<double, std::milli>(t2 - t1).count() / n;
  return r;
}

}  // namespace afford

#endif  // AFFORD_DETECT_DETECTOR_HPP
