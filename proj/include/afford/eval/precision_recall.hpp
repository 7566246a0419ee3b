// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_EVAL_PRECISION_RECALL_HPP
#define AFFORD_EVAL_PRECISION_RECALL_HPP

#include "afford/core/csv.hpp"
#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"
#include "afford/detect/export.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

namespace afford::eval {

struct Prediction {
  Vec3 location = Vec3::Zero();
  int affordance_id = 0;
  double score = 0.0;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct PredictionSet {
  std::string scene_id;
  std::string source;  // multi, single-baseline, icp, ...
  std::vector<Prediction> predictions;

  /// Rejects non-finite values and duplicate (location, affordance) pairs.
  void validate() const {
    std::vector<std::tuple<int, double, double, double>> keys;
    for (const auto& p : predictions) {
      if (!p.location.allFinite() || !std::isfinite(p.score))
        fail(ErrorKind::data, "prediction set '" + scene_id + "': non-finite value");
      keys.emplace_back(p.affordance_id, p.location.x(), p.location.y(), p.location.z());
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end())
      fail(ErrorKind::data, "prediction set '" + scene_id + "': duplicate (location, affordance) pair");
  }
};

struct PRPoint {
  double threshold = 0.0;
  std::size_t predicted = 0;  // predictions with score >= threshold
  std::size_t tp = 0;
  double precision = 0.0;
  double recall = 0.0;

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

enum class PRStatus { ok, empty_truth };

struct PRCurve {
  PRStatus status = PRStatus::ok;
  std::size_t truth = 0;
  std::vector<PRPoint> points;  // one per distinct score, descending threshold
  double auc = 0.0;
};

/// Canonical order: score descending, then location, then affordance. Makes
/// matching independent of input order.
inline std::vector<Prediction> canonical(std::vector<Prediction> v) {
  std::sort(v.begin(), v.end(), [](const Prediction& a, const Prediction& b) {
    return std::make_tuple(-a.score, a.location.x(), a.location.y(), a.location.z(), a.affordance_id) <
           std::make_tuple(-b.score, b.location.x(), b.location.y(), b.location.z(), b.affordance_id);
  });
  return v;
}

/// Area under the curve by the trapezoid rule over recall, starting from
/// recall 0 at the first point's precision.
inline double trapezoid_auc(const std::vector<PRPoint>& pts) {
  if (pts.empty()) return 0.0;
  double auc = 0.0, r0 = 0.0, p0 = pts.front().precision;
  for (const auto& p : pts) {
    auc += (p.recall - r0) * 0.5 * (p.precision + p0);
    r0 = p.recall;
    p0 = p.precision;
  }
  return auc;
}

/// Threshold sweep. At each distinct score the predictions at or above it
/// are matched one-to-one to truth entries of the same affordance within
/// `match_radius`, closest pairs first.
inline PRCurve precision_recall(const PredictionSet& pred, const PredictionSet& truth, double match_radius) {
  require(match_radius > 0.0, "precision_recall: match radius must be positive");
  pred.validate();
  truth.validate();
  PRCurve curve;
  curve.truth = truth.predictions.size();
  if (truth.predictions.empty()) {
    curve.status = PRStatus::empty_truth;
    return curve;
  }
  const auto P = canonical(pred.predictions);
  const auto T = canonical(truth.predictions);

  struct Pair {
    double d;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < P.size(); ++i)
    for (std::size_t j = 0; j < T.size(); ++j) {
      if (P[i].affordance_id != T[j].affordance_id) continue;
      const double d = (P[i].location - T[j].location).norm();
      if (d <= match_radius) pairs.push_back({d, i, j});
    }
  std::sort(pairs.begin(), pairs.end(),
            [](const Pair& a, const Pair& b) { return std::tie(a.d, a.p, a.t) < std::tie(b.d, b.p, b.t); });

  std::vector<char> used_p, used_t;
  for (std::size_t end = 0; end < P.size();) {
    const double tau = P[end].score;
    while (end < P.size() && P[end].score == tau) ++end;
    used_p.assign(P.size(), 0);
    used_t.assign(T.size(), 0);
    std::size_t tp = 0;
    for (const auto& pr : pairs) {
      if (pr.p >= end || used_p[pr.p] || used_t[pr.t]) continue;
      used_p[pr.p] = used_t[pr.t] = 1;
      ++tp;
    }
    PRPoint pt;
    pt.threshold = tau;
    pt.predicted = end;
    pt.tp = tp;
    pt.precision = static_cast<double>(tp) / static_cast<double>(end);
    pt.recall = static_cast<double>(tp) / static_cast<double>(T.size());
    curve.points.push_back(pt);
  }
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

inline PredictionSet predictions_from_rows(const std::vector<DetectionRow>& rows, const std::string& source) {
  PredictionSet s;
  s.source = source;
  for (const auto& r : rows) {
    if (s.scene_id.empty()) s.scene_id = r.scene;
    if (r.scene != s.scene_id) fail(ErrorKind::data, "prediction table mixes scenes '" + s.scene_id + "' and '" + r.scene + "'");
    s.predictions.push_back({r.test_point, r.affordance_id, r.score});
  }
  return s;
}

inline void write_pr_csv(const PRCurve& c, std::ostream& os) {
  os << "threshold,predicted,tp,precision,recall\n";
  for (const auto& p : c.points) {
    std::string line;
    io_detail::append_double(line, p.threshold);
    line += "," + std::to_string(p.predicted) + "," + std::to_string(p.tp) + ",";
    io_detail::append_double(line, p.precision);
    line += ",";
    io_detail::append_double(line, p.recall);
    os << line << '\n';
  }
}

}  // namespace afford::eval

#endif  // AFFORD_EVAL_PRECISION_RECALL_HPP
