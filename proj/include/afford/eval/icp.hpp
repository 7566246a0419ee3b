// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_EVAL_ICP_HPP
#define AFFORD_EVAL_ICP_HPP

#include "afford/cloud/point_cloud.hpp"
#include "afford/cloud/spatial_index.hpp"
#include "afford/core/error.hpp"
#include "afford/core/log.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <cmath>
#include <limits>
#include <vector>

namespace afford::eval {

struct IcpResult {
  Rigid transform = Rigid::Identity();  // candidate frame -> template frame
  double residual = 0.0;                // RMS nearest-neighbour distance, meters
  double score = 0.0;                   // exp(-residual / sigma), in (0, 1]
  double sigma = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// RMS distance from each transformed candidate point to its nearest
/// template point.
inline double rms_residual(const SpatialIndex& tmpl, const std::vector<Vec3>& cand, const Rigid& t) {
  double s = 0.0;
  for (const auto& p : cand) {
    const double d = tmpl.nearest(t * p).distance;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(cand.size()));
}

namespace icp_detail {

inline Mat3 principal_axes(const std::vector<Vec3>& pts, const Vec3& mean) {
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  Mat3 axes = Eigen::SelfAdjointEigenSolver<Mat3>(cov).eigenvectors();
  if (axes.determinant() < 0.0) axes.col(0) *= -1.0;
  return axes;
}

// One ICP descent from `start`; returns the best alignment it visited.
inline IcpResult descend(const SpatialIndex& index, const std::vector<Vec3>& tmpl, const std::vector<Vec3>& cand,
                         Rigid t, std::size_t max_iter, double tol) {
  IcpResult best;
  best.transform = t;
  best.residual = rms_residual(index, cand, t);
  Eigen::Matrix3Xd src(3, static_cast<Eigen::Index>(cand.size()));
  Eigen::Matrix3Xd dst(3, static_cast<Eigen::Index>(cand.size()));
  double prev = best.residual;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    for (std::size_t i = 0; i < cand.size(); ++i) {
      src.col(static_cast<Eigen::Index>(i)) = cand[i];
      dst.col(static_cast<Eigen::Index>(i)) = tmpl[index.nearest(t * cand[i]).index];
    }
    t = Rigid(Eigen::umeyama(src, dst, false));
    const double res = rms_residual(index, cand, t);
    best.iterations = it;
    if (res < best.residual) {
      best.residual = res;
      best.transform = t;
    }
    if (std::abs(prev - res) < tol) {
      best.converged = true;
      break;
    }
    prev = res;
  }
  return best;
}

}  // namespace icp_detail

/// Point-to-point ICP aligning `candidate` onto `tmpl`. Descents start from
/// the centroid offset and from the four proper principal-axis matchings;
/// each step solves the closed-form rigid fit to the current
/// nearest-neighbour pairs and stops when the residual changes by less than
/// `tol`. The lowest-residual alignment is returned.
inline IcpResult icp_score(const PointCloud& tmpl, const PointCloud& candidate, std::size_t max_iter = 100,
                           double tol = 1e-10) {
  if (tmpl.empty() || candidate.empty()) fail(ErrorKind::invalid_argument, "icp_score: empty cloud");
  require(max_iter > 0, "icp_score: max_iter must be positive");
  const SpatialIndex index(tmpl.points);
  const Vec3 mt = mean_of(tmpl.points), mc = mean_of(candidate.points);

  std::vector<Rigid> starts = {Rigid(Eigen::Translation3d(mt - mc))};
  if (tmpl.size() >= 3 && candidate.size() >= 3) {
    const Mat3 et = icp_detail::principal_axes(tmpl.points, mt);
    const Mat3 ec = icp_detail::principal_axes(candidate.points, mc);
    for (const Vec3 flip : {Vec3(1, 1, 1), Vec3(-1, -1, 1), Vec3(-1, 1, -1), Vec3(1, -1, -1)}) {
      const Mat3 r = et * flip.asDiagonal() * ec.transpose();
      starts.push_back(Eigen::Translation3d(mt) * Rigid(r) * Eigen::Translation3d(-mc));
    }
  }

  IcpResult best;
  best.residual = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    auto r = icp_detail::descend(index, tmpl.points, candidate.points, s, max_iter, tol);
    if (r.residual < best.residual) best = r;
  }
  best.sigma = bounding_box(tmpl.points).diagonal() / 20.0;
  if (best.sigma <= 0.0) best.sigma = 1e-3;
  if (!best.converged)
    log::warn("icp_score: no convergence within " + std::to_string(max_iter) + " iterations; best alignment kept");
  best.score = std::exp(-best.residual / best.sigma);
  return best;
}

}  // namespace afford::eval

#endif  // AFFORD_EVAL_ICP_HPP
