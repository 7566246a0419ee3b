// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include "afford/agglomerate/clustering.hpp"
#include "afford/agglomerate/descriptor_io.hpp"
#include "afford/cli.hpp"
#include "afford/detect/detector.hpp"
#include "afford/eval/bradley_terry.hpp"
#include "afford/eval/icp.hpp"
#include "afford/eval/precision_recall.hpp"
#include "afford/saliency/record.hpp"
#include "afford/synthetic.hpp"
#include "afford/tensor/descriptor.hpp"
#include "afford/tensor/descriptor_io.hpp"
#include "support/clustering_oracle.hpp"
#include "support/eval_oracles.hpp"
#include "support/temp_dir.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using namespace afford;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += !o.pass;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << " [" << std::fixed
            << std::setprecision(1) << seconds_since(t0) << " s]" << std::endl;
  std::cout.unsetf(std::ios::fixed);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

// Grid clustering against the brute-force transcription, both keep modes.
Outcome clustering_equivalence() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  int matched = 0, total = 0;
  std::string first_error;
  for (int inst = 0; inst < 100; ++inst) {
    const bool snap = inst % 4 == 0;
    const double e = snap ? 0.0078125 : rng.uniform(0.002, 0.02);
    const auto kps = afford::testing::random_instance(rng, e, 5, 2000, 10, snap);
    for (auto mode : {ClusterMode::closest_per_affordance, ClusterMode::all}) {
      ++total;
      std::string why;
      const auto r = cluster_keypoints(kps, e, mode);
      if (afford::testing::matches_oracle(r.descriptor, kps, afford::testing::brute_force_clustering(kps, e, mode), &why))
        ++matched;
      else if (first_error.empty())
        first_error = "instance " + std::to_string(inst) + ": " + why;
    }
  }
  const double t = seconds_since(t0);
  return {matched == total && t < 10.0, std::to_string(matched) + "/" + std::to_string(total) +
                                            " runs identical to oracle (100 instances x 2 modes), " + fmt(t, 3) +
                                            " s (limit 10 s)" + (first_error.empty() ? "" : "; " + first_error)};
}

// Range, peak, monotonicity and bin permutation of the scoring model.
Outcome score_properties() {
  Rng rng(7);
  std::size_t out_of_range = 0;
  for (int i = 0; i < 10000; ++i) {
    AgglomeratedDescriptor d;
    d.orientations = 1 + static_cast<int>(rng.below(4));
    const int na = 1 + static_cast<int>(rng.below(3));
    for (int a = 0; a < na; ++a) d.affordances.push_back({a, "a" + std::to_string(a)});
    const std::size_t nc = 1 + rng.below(6);
    for (std::size_t c = 0; c < nc; ++c) {
      Cell cell;
      cell.centroid = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
      CellEntry e;
      e.affordance_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(na)));
      e.orientation_id = static_cast<int>(rng.below(static_cast<std::uint64_t>(d.orientations)));
      const Vec3 p(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.0005, 0.05));
      e.kept.push_back({cell.centroid, p, p.norm()});
      e.member_count = 1;
      cell.entries.push_back(e);
      d.cells.push_back(cell);
    }
    PointCloud scene;
    const std::size_t np = 1 + rng.below(40);
    for (std::size_t k = 0; k < np; ++k)
      scene.points.emplace_back(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15));
    const SpatialIndex idx(scene.points);
    for (double s : score_at_point(idx, ScoringModel::from(d), scene.points[0]).scores)
      out_of_range += !(s >= 0.0 && s <= 1.0);
  }

  // Zero deviation scores exactly one.
  std::size_t peak_misses = 0;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(0.001, 0.1));
    peak_misses += score_contribution(p, p, keypoint_weight(p)) != 1.0;
  }

  // Monotone on grids of provenance vectors and deviation directions.
  std::size_t monotone_breaks = 0, grid_points = 0;
  for (double px : {-0.03, 0.0, 0.02})
    for (double pz : {0.004, 0.015, 0.05}) {
      const Vec3 p(px, 0.01, pz);
      for (const Vec3& dir : {Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(1, -1, 2).normalized()}) {
        double prev = 2.0;
        for (int k = 0; k <= 100; ++k) {
          const double s = score_contribution(p + (k * 5e-4) * dir, p, keypoint_weight(p));
          monotone_breaks += !(s < prev);
          prev = s;
          ++grid_points;
        }
      }
    }

  // Spinning the scene by m bins about the test point rotates the bin scores by m.
  const auto ex = synth::make_example(0);
  const auto desc = build_descriptor(ex);
  const auto model = ScoringModel::from(desc);
  const Vec3 t = ex.scene_patch.points[anchor_index(ex)];
  ScoreOptions opt;
  opt.search_radius = 10.0;
  const auto s0 = score_at_point(SpatialIndex(ex.scene_patch.points), model, t, opt);
  double worst = 0.0;
  for (int m = 1; m < desc.orientations; ++m) {
    const auto spun = synth::spin_about(ex.scene_patch, t, m, desc.orientations);
    const auto sm = score_at_point(SpatialIndex(spun.points), model, t, opt);
    for (int o = 0; o < desc.orientations; ++o)
      worst = std::max(worst, std::abs(sm.scores[static_cast<std::size_t>((o + m) % desc.orientations)] -
                                       s0.scores[static_cast<std::size_t>(o)]));
  }

  const bool pass = out_of_range == 0 && peak_misses == 0 && monotone_breaks == 0 && worst <= 1e-6;
  return {pass, "10000 random instances, " + std::to_string(out_of_range) + " scores outside [0,1]; " +
                    std::to_string(peak_misses) + "/1000 zero-deviation entries differ from 1; " +
                    std::to_string(monotone_breaks) + "/" + std::to_string(grid_points) +
                    " grid steps not strictly decreasing; max bin-permutation error " + fmt(worst, 3) +
                    " (limit 1e-6)"};
}

// Planted affordances recovered from exhaustive detection on spun scenes.
Outcome self_detection() {
  constexpr int kExamples = 10;
  std::vector<InteractionExample> examples;
  std::vector<AffordanceDescriptor> descs;
  for (int i = 0; i < kExamples; ++i) {
    examples.push_back(synth::make_example(i));
    descs.push_back(build_descriptor(examples.back()));
  }
  const double e = kCellSizeFine;
  const auto agg = agglomerate(descs, e);
  DetectorConfig cfg;
  cfg.exhaustive = true;
  int ok = 0;
  double min_score = 1.0;
  std::string misses;
  for (int i = 0; i < kExamples; ++i) {
    const auto& ex = examples[static_cast<std::size_t>(i)];
    const Vec3 anchor = ex.scene_patch.points[anchor_index(ex)];
    const int m = i % kOrientations;
    const auto scene = synth::spin_about(ex.scene_patch, anchor, m);
    const auto res = detect_scene(scene, agg, cfg);
    if (res.detections.empty()) {
      misses += " ex" + std::to_string(i) + ":none";
      continue;
    }
    const auto& top = res.detections.front();
    const double dist = (top.test_point - anchor).norm();
    min_score = std::min(min_score, top.score);
    if (top.affordance_id == ex.affordance_id && top.orientation_id == m && dist <= e && top.score >= 0.95) {
      ++ok;
    } else {
      misses += " ex" + std::to_string(i) + ":(id " + std::to_string(top.affordance_id) + ", bin " +
                std::to_string(top.orientation_id) + ", " + fmt(dist, 3) + " m, score " + fmt(top.score) + ")";
    }
  }
  return {ok == kExamples, std::to_string(ok) + "/" + std::to_string(kExamples) +
                               " planted affordances top-ranked in the planted bin within " + fmt(e) +
                               " m, min top score " + fmt(min_score) + " (limit 0.95)" +
                               (misses.empty() ? "" : "; misses:" + misses)};
}

std::vector<AffordanceDescriptor> desk_descriptors() {
  std::vector<AffordanceDescriptor> v;
  for (int i = 0; i < 84; ++i) v.push_back(build_descriptor(synth::make_example(i)));
  return v;
}

// Centroid count against cell size for 84 x 4096 keypoints.
Outcome dimensionality(const std::vector<AffordanceDescriptor>& ds) {
  std::size_t total = 0;
  for (const auto& d : ds) total += d.keypoints.size();
  std::string curve;
  bool monotone = true;
  std::size_t prev = std::numeric_limits<std::size_t>::max(), at_fine = 0;
  for (double e : {0.0025, 0.005, 0.0075, 0.01, 0.015, 0.02}) {
    const auto n = agglomerate(ds, e).cells.size();
    monotone = monotone && n < prev;
    prev = n;
    if (e == kCellSizeFine) at_fine = n;
    curve += " " + fmt(e * 100, 3) + "cm:" + std::to_string(n);
  }
  const double factor = static_cast<double>(total) / static_cast<double>(at_fine);
  return {total == 344064 && monotone && factor >= 4.0,
          std::to_string(total) + " keypoints; centroids" + curve + (monotone ? " (strictly decreasing)" : " (NOT monotone)") +
              "; reduction at 0.5 cm " + fmt(factor, 3) + "x (limit 4x)"};
}

// Agglomerated versus sequential queries, timed by the bench subcommand.
Outcome speedup(const std::vector<AffordanceDescriptor>& ds) {
  const auto t0 = Clock::now();
  afford::testing::TempDir dir;
  std::vector<std::string> singles;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    singles.push_back((dir / ("d" + std::to_string(i) + ".itns")).string());
    save_descriptor(ds[i], singles.back());
  }
  const auto ex = synth::make_example(0);
  write_cloud(ex.scene_patch, dir / "scene.ply", CloudFormat::ply_binary_le);
  std::ostringstream out, err;
  std::vector<std::string> args = {"agglomerate", "-o", (dir / "agg.itns").string(), "--cell-size-m", "0.005"};
  args.insert(args.end(), singles.begin(), singles.end());
  if (cli::run(args, out, err) != 0) return {false, "agglomerate failed: " + err.str()};
  args = {"bench", "--descriptor", (dir / "agg.itns").string(), "--scene", (dir / "scene.ply").string(),
          "--test-points", "100", "-o", (dir / "bench.json").string(), "--singles"};
  args.insert(args.end(), singles.begin(), singles.end());
  if (cli::run(args, out, err) != 0) return {false, "bench failed: " + err.str()};
  std::ifstream f(dir / "bench.json");
  const auto j = nlohmann::json::parse(f);
  const double s = j["speedup"].get<double>();
  const double t = seconds_since(t0);
  return {s >= 3.0 && t < 300.0 && j["test_points"] == 100 && j["affordances"] == 84,
          "84 affordances, 100 test points: agglomerated " + fmt(j["agglomerated_ms_per_test_point"].get<double>()) +
              " ms/point vs sequential " + fmt(j["individual_ms_per_test_point"].get<double>()) + " ms/point, speedup " +
              fmt(s, 3) + "x (limit 3x), " + fmt(t, 3) + " s (limit 300 s)"};
}

Outcome bradley_terry() {
  const std::vector<double> truth = {1, 2, 4, 8};
  int perfect = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(1000 + seed);
    const auto r = eval::fit_bradley_terry(afford::testing::sample_judgments(rng, truth, 200));
    perfect += r.converged && eval::kendall_tau(r.strengths, truth) == 1.0;
  }
  eval::JudgmentSet two;
  two.items = {"A", "B"};
  for (int k = 0; k < 7; ++k) two.comparisons.emplace_back(0, 1);
  for (int k = 0; k < 3; ++k) two.comparisons.emplace_back(1, 0);
  const auto r = eval::fit_bradley_terry(two, 1e-14);
  const double err = std::abs(r.strengths[0] / r.strengths[1] - 7.0 / 3.0);
  return {perfect >= 95 && err <= 1e-6, "tau = 1 in " + std::to_string(perfect) + "/100 seeds (limit 95); two-item ratio error " +
                                             fmt(err, 3) + " (limit 1e-6)"};
}

Outcome icp_recovery() {
  Rng rng(31);
  int ok = 0;
  double worst = 0.0;
  for (int shape = 0; shape < 20; ++shape) {
    const auto tmpl = afford::testing::random_shape(rng, shape);
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec3 axis = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    const Rigid move = Eigen::Translation3d(0.05 * Vec3(std::cos(heading), std::sin(heading), 0.0)) *
                       Eigen::AngleAxisd(10.0 * std::numbers::pi / 180.0, axis);
    const auto r = eval::icp_score(tmpl, transformed(tmpl, move));
    worst = std::max(worst, r.residual);
    ok += r.residual < 1e-3;
  }
  return {ok == 20, std::to_string(ok) + "/20 shapes recovered from 10 deg + 5 cm, worst residual " + fmt(worst * 1000, 3) +
                        " mm (limit 1 mm)"};
}

Outcome pr_harness() {
  Rng rng(77);
  int equal = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto pred = afford::testing::random_prediction_set(rng, 1 + rng.below(60), 4, 0.1, true);
    const auto truth = afford::testing::random_prediction_set(rng, 1 + rng.below(40), 4, 0.1, true);
    const double radius = rng.uniform(0.005, 0.05);
    equal += eval::precision_recall(pred, truth, radius).points == afford::testing::brute_force_sweep(pred, truth, radius);
  }
  const auto s = afford::testing::random_prediction_set(rng, 40, 3, 0.5, false);
  const double auc = eval::precision_recall(s, s, 0.01).auc;
  return {equal == 50 && auc == 1.0, std::to_string(equal) + "/50 curves equal to the oracle point for point; identity AUC " +
                                         fmt(auc, 17)};
}

Outcome saliency_fixture() {
  const std::string path = std::string(AFFORD_TEST_DATA_DIR) + "/saliency_valid.json";
  const auto records = load_saliency(path, std::set<int>{0, 1, 2});
  std::size_t points = 0;
  for (const auto& r : records) points += r.points.size();
  return {records.size() == 2, "fixture passes the primary validator: " + std::to_string(records.size()) + " records, " +
                                   std::to_string(points) + " points"};
}

}  // namespace

int main() {
  log::set_sink([](log::Level l, const std::string& m) {
    if (l == log::Level::warning) std::cerr << "warning: " << m << '\n';
  });
  std::cout << "acceptance criteria" << std::endl;
  criterion("clustering equals brute-force oracle", clustering_equivalence);
  criterion("score kernel properties", score_properties);
  criterion("self-detection on planted examples", self_detection);
  const auto desk = desk_descriptors();
  criterion("dimensionality reduction", [&] { return dimensionality(desk); });
  criterion("agglomerated query speedup", [&] { return speedup(desk); });
  criterion("Bradley-Terry recovery", bradley_terry);
  criterion("ICP known-transform recovery", icp_recovery);
  criterion("precision-recall harness", pr_harness);
  criterion("salient-point fixture validation", saliency_fixture);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
