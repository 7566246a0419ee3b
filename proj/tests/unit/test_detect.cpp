// SPDX-License-Identifier: Apache-2.0

#include "afford/agglomerate/clustering.hpp"
#include "afford/core/log.hpp"
#include "afford/detect/detector.hpp"
#include "afford/detect/export.hpp"
#include "afford/synthetic.hpp"
#include "afford/tensor/descriptor.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

using namespace afford;

namespace {

// One cell at `c` holding a single keypoint with provenance `p`.
AgglomeratedDescriptor single_entry(const Vec3& c, const Vec3& p) {
  AgglomeratedDescriptor d;
  d.cell_size = 0.01;
  d.orientations = 1;
  Cell cell;
  cell.centroid = c;
  CellEntry e;
  e.affordance_id = 3;
  e.member_count = 1;
  e.kept.push_back({c, p, p.norm()});
  cell.entries.push_back(e);
  d.cells.push_back(cell);
  AffordanceInfo info;
  info.id = 3;
  info.label = "probe";
  d.affordances.push_back(info);
  return d;
}

PointCloud cloud_of(std::vector<Vec3> pts) {
  PointCloud c;
  c.points = std::move(pts);
  return c;
}

const std::vector<AffordanceDescriptor>& trained() {
  static const auto ds = [] {
    std::vector<AffordanceDescriptor> v;
    for (int i = 0; i < 3; ++i) v.push_back(build_descriptor(synth::make_example(i)));
    return v;
  }();
  return ds;
}

const AgglomeratedDescriptor& trained_agglomerated() {
  static const auto d = agglomerate(trained(), kCellSizeFine, ClusterMode::closest_per_affordance);
  return d;
}

PointCloud random_scene(Rng& rng, std::size_t n, double half) {
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.emplace_back(rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half));
  return c;
}

}  // namespace

TEST(ScoreKernel, PeakIsExactlyOne) {
  EXPECT_EQ(score_contribution(Vec3(0.01, -0.02, 0.003), Vec3(0.01, -0.02, 0.003), 0.0224), 1.0);
  const auto d = single_entry(Vec3(0.25, 0, 0), Vec3(0, 0, 0.5));
  const auto scene = cloud_of({Vec3(0.25, 0, 0.5), Vec3(3, 3, 3)});
  const SpatialIndex idx(scene.points);
  const auto s = score_at_point(idx, ScoringModel::from(d), Vec3::Zero());
  ASSERT_EQ(s.scores.size(), 1u);
  EXPECT_EQ(s.scores[0], 1.0);
}

TEST(ScoreKernel, DeviationOfOneWidthGivesExpMinusHalf) {
  const Vec3 p(0.003, 0.004, 0.0);
  const double w = p.norm();
  for (const Vec3& dir : {Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(0.6, -0.8, 0)})
    EXPECT_NEAR(score_contribution(p + w * dir, p, w), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(std::exp(-0.5), 0.6065306597, 1e-10);
}

TEST(ScoreKernel, EmptyNeighbourhoodScoresZero) {
  const auto d = single_entry(Vec3(0.01, 0, 0), Vec3(0, 0, 0.01));
  const auto scene = cloud_of({Vec3(5, 5, 5), Vec3(-5, 2, 1)});
  const SpatialIndex idx(scene.points);
  const auto s = score_at_point(idx, ScoringModel::from(d), Vec3::Zero(), {}, true);
  EXPECT_EQ(s.scores[0], 0.0);
  EXPECT_EQ(s.targets[0], PointScores::npos);
}

TEST(ScoreKernel, StrictlyDecreasingInDeviation) {
  const Vec3 p(0.0, 0.01, 0.02);
  const double w = p.norm();
  for (const Vec3& dir : {Vec3(1, 0, 0), Vec3(0, 1, 0).normalized(), Vec3(1, 1, 1).normalized()}) {
    double prev = 2.0;
    for (int k = 0; k <= 60; ++k) {
      const double s = score_contribution(p + (k * 0.001) * dir, p, w);
      EXPECT_LT(s, prev);
      prev = s;
    }
  }
}

TEST(ScoreKernel, StrictlyIncreasingInWidth) {
  const Vec3 p(0.01, 0.0, 0.0);
  const Vec3 v = p + Vec3(0, 0.004, 0);
  double prev = -1.0;
  for (int k = 1; k <= 60; ++k) {
    const double s = score_contribution(v, p, 0.001 * k);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(ScoreKernel, RandomInstancesStayInUnitInterval) {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    const Vec3 v(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    const double s = score_contribution(v, p, std::max(p.norm(), 1e-6));
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
  }
  for (int i = 0; i < 200; ++i) {
    AgglomeratedDescriptor d;
    d.orientations = 2;
    const int na = 1 + static_cast<int>(rng.below(3));
    for (int a = 0; a < na; ++a) d.affordances.push_back({a, "a" + std::to_string(a)});
    const std::size_t nc = 1 + rng.below(20);
    for (std::size_t c = 0; c < nc; ++c) {
      Cell cell;
      cell.centroid = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
      for (int a = 0; a < na; ++a) {
        if (rng.below(2) == 0) continue;
        CellEntry e;
        e.affordance_id = a;
        e.orientation_id = static_cast<int>(rng.below(2));
        const Vec3 p(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.001, 0.05));
        e.kept.push_back({cell.centroid, p, p.norm()});
        e.member_count = 1;
        cell.entries.push_back(e);
      }
      if (!cell.entries.empty()) d.cells.push_back(cell);
    }
    if (d.cells.empty()) continue;
    const auto scene = random_scene(rng, 1 + rng.below(200), 0.2);
    const SpatialIndex idx(scene.points);
    const auto s = score_at_point(idx, ScoringModel::from(d), scene.points[0]);
    for (double x : s.scores) {
      ASSERT_GE(x, 0.0);
      ASSERT_LE(x, 1.0);
    }
  }
}

TEST(ScoreKernel, SlotAveragesEveryRecord) {
  AgglomeratedDescriptor d = single_entry(Vec3(0.25, 0, 0), Vec3(0, 0, 0.5));
  Cell other;
  other.centroid = Vec3(-0.25, 0, 0);
  CellEntry e;
  e.affordance_id = 3;
  e.member_count = 1;
  e.kept.push_back({other.centroid, Vec3(0, 0, 0.5), 0.5});
  other.entries.push_back(e);
  d.cells.push_back(other);
  // Both cells match the single scene point; the second deviates by exactly w.
  const auto scene = cloud_of({Vec3(0.25, 0, 0.5)});
  const SpatialIndex idx(scene.points);
  const auto s = score_at_point(idx, ScoringModel::from(d), Vec3::Zero());
  EXPECT_NEAR(s.scores[0], 0.5 * (1.0 + std::exp(-0.5)), 1e-15);
}

TEST(ScoreKernel, RestrictedNeighbourMatchesBruteForce) {
  Rng rng(5);
  const auto& d = trained_agglomerated();
  const auto model = ScoringModel::from(d);
  const auto ex = synth::make_example(1);
  const SpatialIndex idx(ex.scene_patch.points);
  const auto& pts = ex.scene_patch.points;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 t = pts[rng.below(pts.size())];
    ScoreOptions opt;
    opt.search_radius = 0.08;
    const auto s = score_at_point(idx, model, t, opt, true);
    const Vec3 center = t + model.support().center();
    for (std::size_t j = 0; j < model.cell_count(); j += 37) {
      const Vec3 q = t + model.centroids()[j];
      std::size_t best = PointScores::npos;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if ((pts[i] - center).norm() > opt.search_radius) continue;
        const double d2 = (pts[i] - q).squaredNorm();
        if (d2 < bd) {
          bd = d2;
          best = i;
        }
      }
      ASSERT_EQ(s.targets[j], best) << "cell " << j;
    }
  }
}

TEST(ScoreKernel, RotationPermutesOrientationBins) {
  const auto& desc = trained().front();
  const auto model = ScoringModel::from(desc);
  const auto ex = synth::make_example(0);
  const Vec3 t = ex.scene_patch.points[anchor_index(ex)];
  ScoreOptions opt;
  opt.search_radius = 10.0;
  const SpatialIndex base(ex.scene_patch.points);
  const auto s0 = score_at_point(base, model, t, opt);
  const int no = desc.orientations;
  for (int m = 1; m < no; ++m) {
    const auto spun = synth::spin_about(ex.scene_patch, t, m, no);
    const SpatialIndex idx(spun.points);
    const auto sm = score_at_point(idx, model, t, opt);
    for (int o = 0; o < no; ++o) EXPECT_NEAR(sm.scores[(o + m) % no], s0.scores[o], 1e-6) << "m=" << m << " o=" << o;
    auto a = s0.scores, b = sm.scores;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
  }
}

TEST(TestPoints, FullDrawIsPermutation) {
  Rng rng(1);
  const auto scene = random_scene(rng, 57, 1.0);
  auto idx = sample_test_point_indices(scene, scene.size(), 11);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < idx.size(); ++i) EXPECT_EQ(idx[i], i);
}

TEST(TestPoints, DeterministicUnderSeed) {
  Rng rng(2);
  const auto scene = random_scene(rng, 500, 1.0);
  EXPECT_EQ(sample_test_points(scene, 40, 3), sample_test_points(scene, 40, 3));
  EXPECT_NE(sample_test_point_indices(scene, 40, 3), sample_test_point_indices(scene, 40, 4));
  const auto idx = sample_test_point_indices(scene, 40, 3);
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 40u);
}

TEST(TestPoints, OversizedRequestFallsBackToWholeScene) {
  Rng rng(3);
  const auto scene = random_scene(rng, 20, 1.0);
  log::Capture cap;
  const auto idx = sample_test_point_indices(scene, 50, 1);
  EXPECT_EQ(idx.size(), 20u);
  EXPECT_FALSE(cap.messages.empty());
  EXPECT_THROW(sample_test_point_indices(PointCloud{}, 1, 1), Error);
}

TEST(TestPoints, UniformFrequencies) {
  Rng rng(4);
  const auto scene = random_scene(rng, 100, 1.0);
  constexpr int draws = 10000;
  constexpr std::size_t n = 50;
  std::vector<int> hits(scene.size(), 0);
  for (int r = 0; r < draws; ++r)
    for (auto i : sample_test_point_indices(scene, n, 1000 + r)) ++hits[i];
  const double expected = draws * static_cast<double>(n) / static_cast<double>(scene.size());
  for (std::size_t i = 0; i < hits.size(); ++i) EXPECT_NEAR(hits[i], expected, 0.05 * expected) << "point " << i;
}

TEST(TestPoints, DensityPlan) {
  const auto ex = synth::make_example(2);
  DetectorConfig cfg;
  const auto plan = plan_test_points(ex.scene_patch, cfg);
  const double area = surface_area(ex.scene_patch);
  EXPECT_GT(area, 0.1);
  EXPECT_EQ(plan.size(), static_cast<std::size_t>(std::ceil(area * cfg.test_point_density)));
  cfg.exhaustive = true;
  EXPECT_EQ(plan_test_points(ex.scene_patch, cfg).size(), ex.scene_patch.size());
}

TEST(Detector, EmptySceneGivesNoDetections) {
  const auto r = detect_scene(PointCloud{}, trained_agglomerated());
  EXPECT_TRUE(r.detections.empty());
  EXPECT_TRUE(r.test_points.empty());
}

TEST(Detector, ThresholdsPerPipeline) {
  DetectorConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.effective_threshold(), 0.7);
  cfg.pipeline = Pipeline::saliency;
  EXPECT_DOUBLE_EQ(cfg.effective_threshold(), 0.5);
  cfg.threshold = 0.2;
  EXPECT_DOUBLE_EQ(cfg.effective_threshold(), 0.2);
  cfg.threshold = 1.5;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_EQ(pipeline_from_string("saliency"), Pipeline::saliency);
  EXPECT_FALSE(pipeline_from_string("other").has_value());
}

TEST(Detector, OutputIsExactlyThePairsAboveThreshold) {
  const auto ex = synth::make_example(1);
  const auto& d = trained_agglomerated();
  DetectorConfig cfg;
  cfg.test_points = 25;
  cfg.threshold = 0.0;
  const auto all = detect_scene(ex.scene_patch, d, cfg);
  ASSERT_EQ(all.detections.size(), all.test_points.size() * d.affordances.size());
  const auto model = ScoringModel::from(d);
  const SpatialIndex idx(ex.scene_patch.points);
  for (const auto& det : all.detections) {
    const auto s = score_at_point(idx, model, det.test_point);
    const auto a = static_cast<std::size_t>(std::find(model.affordance_ids().begin(), model.affordance_ids().end(),
                                                      det.affordance_id) -
                                            model.affordance_ids().begin());
    const int no = model.orientations();
    const auto first = s.scores.begin() + static_cast<long>(a * no);
    EXPECT_EQ(det.score, *std::max_element(first, first + no));
    EXPECT_EQ(det.orientation_id, std::max_element(first, first + no) - first);
    EXPECT_LT(det.orientation_id, 8);
  }
  for (std::size_t i = 1; i < all.detections.size(); ++i) EXPECT_GE(all.detections[i - 1].score, all.detections[i].score);

  for (double th : {0.3, 0.6, 0.9}) {
    cfg.threshold = th;
    const auto some = detect_scene(ex.scene_patch, d, cfg);
    std::size_t expected = 0;
    for (const auto& det : all.detections) expected += det.score >= th;
    EXPECT_EQ(some.detections.size(), expected);
    for (const auto& det : some.detections) EXPECT_GE(det.score, th);
  }
}

TEST(Detector, DeterministicAcrossThreadCounts) {
  const auto ex = synth::make_example(0);
  DetectorConfig cfg;
  cfg.test_points = 30;
  cfg.threshold = 0.1;
  const auto a = detect_scene(ex.scene_patch, trained_agglomerated(), cfg);
  cfg.threads = 3;
  const auto b = detect_scene(ex.scene_patch, trained_agglomerated(), cfg);
  ASSERT_EQ(a.detections.size(), b.detections.size());
  for (std::size_t i = 0; i < a.detections.size(); ++i) {
    EXPECT_EQ(a.detections[i].test_point_id, b.detections[i].test_point_id);
    EXPECT_EQ(a.detections[i].affordance_id, b.detections[i].affordance_id);
    EXPECT_EQ(a.detections[i].score, b.detections[i].score);
  }
}

TEST(Detector, FindsPlantedAffordanceInSpunScene) {
  const auto& d = trained_agglomerated();
  for (int id = 0; id < 3; ++id) {
    const auto ex = synth::make_example(id);
    const auto anchor_i = anchor_index(ex);
    const Vec3 anchor = ex.scene_patch.points[anchor_i];
    const int m = (id * 3 + 1) % 8;
    const auto scene = synth::spin_about(ex.scene_patch, anchor, m);
    // The anchor plus a random sample of competitors.
    auto tps = sample_test_point_indices(scene, 150, 17 + id);
    tps.push_back(anchor_i);
    DetectorConfig cfg;
    cfg.threshold = 0.0;
    const auto r = detect_scene(scene, d, cfg, tps);
    ASSERT_FALSE(r.detections.empty());
    const auto& top = r.detections.front();
    EXPECT_EQ(top.affordance_id, id);
    EXPECT_EQ(top.orientation_id, m);
    EXPECT_LE((top.test_point - anchor).norm(), d.cell_size);
    EXPECT_GE(top.score, 0.95);
  }
}

TEST(Detector, PoseReconstructsPlantedObject) {
  const auto& d = trained_agglomerated();
  const auto ex = synth::make_example(2);
  const auto ai = anchor_index(ex);
  DetectorConfig cfg;
  cfg.threshold = 0.0;
  const auto r = detect_scene(ex.scene_patch, d, cfg, std::vector<std::size_t>{ai});
  const auto it = std::find_if(r.detections.begin(), r.detections.end(),
                               [](const Detection& x) { return x.affordance_id == 2; });
  ASSERT_NE(it, r.detections.end());
  ASSERT_EQ(it->orientation_id, 0);
  EXPECT_TRUE(it->object_pose.matrix().isApprox(ex.object_pose.matrix(), 1e-12));
}

TEST(DetectionExport, CsvRoundTripAndOverlay) {
  const auto ex = synth::make_example(1);
  DetectorConfig cfg;
  cfg.test_points = 5;
  cfg.threshold = 0.0;
  auto r = detect_scene(ex.scene_patch, trained_agglomerated(), cfg);
  r.detections.front().label = "needs, \"quoting\"";
  afford::testing::TempDir dir;
  write_detections_csv(r, "desk one", dir / "d.csv");
  const auto rows = read_detections_csv(dir / "d.csv");
  ASSERT_EQ(rows.size(), r.detections.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].scene, "desk one");
    EXPECT_EQ(rows[i].label, r.detections[i].label);
    EXPECT_EQ(rows[i].score, r.detections[i].score);
    EXPECT_EQ(rows[i].test_point, r.detections[i].test_point);
    EXPECT_EQ(rows[i].affordance_id, r.detections[i].affordance_id);
    EXPECT_EQ(rows[i].orientation_id, r.detections[i].orientation_id);
  }

  const auto overlay = overlay_cloud(r, trained_agglomerated(), &ex.scene_patch, 2);
  std::size_t expected = ex.scene_patch.size();
  for (int i = 0; i < 2; ++i) expected += trained_agglomerated().find(r.detections[i].affordance_id)->query_object.size();
  EXPECT_EQ(overlay.size(), expected);

  std::ofstream(dir / "bad.csv") << "scene,x\n";
  EXPECT_THROW(read_detections_csv(dir / "bad.csv"), ParseError);
}

TEST(DetectionExport, EmptyResultWritesHeaderOnly) {
  std::ostringstream os;
  write_detections_csv(DetectionResult{}, "s", os);
  EXPECT_EQ(os.str(), std::string(kDetectionHeader) + "\n");
}

TEST(Benchmark, RejectsMismatchedAffordanceSets) {
  const auto& ds = trained();
  const auto ex = synth::make_example(0);
  const std::vector<Vec3> tps = {ex.scene_patch.points[0]};
  EXPECT_THROW(benchmark(ex.scene_patch, trained_agglomerated(), std::span(ds.data(), 2), tps), Error);
  EXPECT_THROW(benchmark(ex.scene_patch, trained_agglomerated(), ds, {}), Error);
}

TEST(Benchmark, SingleAffordanceRatioNearOne) {
  const auto& ds = trained();
  const std::vector<AffordanceDescriptor> one = {ds[0]};
  // All-mode at a tiny cell keeps every keypoint in its own cell, matching the raw form.
  const auto agg = agglomerate(one, 1e-5, ClusterMode::all);
  const auto ex = synth::make_example(0);
  const auto tps = sample_test_points(ex.scene_patch, 40, 1);
  const auto r = benchmark(ex.scene_patch, agg, one, tps);
  EXPECT_EQ(r.affordances, 1u);
  EXPECT_EQ(r.agglomerated_keypoints, r.individual_keypoints);
  EXPECT_GT(r.speedup(), 0.5);
  EXPECT_LT(r.speedup(), 2.0);
}

TEST(Benchmark, TimeGrowsWithCentroidCount) {
  const auto ex = synth::make_example(3);
  const auto tps = sample_test_points(ex.scene_patch, 20, 2);
  std::vector<double> ms;
  for (std::size_t n : {1000u, 10000u, 60000u}) {
    BuildConfig cfg;
    cfg.keypoints = n / kOrientations;
    cfg.tensor_samples = std::max<std::size_t>(2048, n / kOrientations);
    const std::vector<AffordanceDescriptor> one = {build_descriptor(ex, cfg)};
    const auto agg = agglomerate(one, 1e-5, ClusterMode::all);
    ms.push_back(benchmark(ex.scene_patch, agg, one, tps).agglomerated_ms);
  }
  EXPECT_LT(ms[0], ms[1]);
  EXPECT_LT(ms[1], ms[2]);
}
