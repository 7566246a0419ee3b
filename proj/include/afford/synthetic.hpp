// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_SYNTHETIC_HPP
#define AFFORD_SYNTHETIC_HPP

// Small procedurally generated object/scene pairs. They stand in for a CAD
// corpus in tests, benchmarks and demos.

#include "afford/cloud/point_cloud.hpp"
#include "afford/core/geometry.hpp"
#include "afford/core/random.hpp"
#include "afford/tensor/bisector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace afford::synth {

inline void append(PointCloud& dst, const PointCloud& src) {
  dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
}

inline PointCloud plane_patch(double x0, double x1, double y0, double y1, double z, double spacing) {
  PointCloud c;
  const int nx = std::max(1, static_cast<int>(std::round((x1 - x0) / spacing)));
  const int ny = std::max(1, static_cast<int>(std::round((y1 - y0) / spacing)));
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j <= ny; ++j) c.points.emplace_back(x0 + (x1 - x0) * i / nx, y0 + (y1 - y0) * j / ny, z);
  return c;
}

/// Vertical wall in the plane y = y, spanning x in [x0, x1] and z in [z0, z1].
inline PointCloud wall_y(double x0, double x1, double y, double z0, double z1, double spacing) {
  PointCloud c;
  const int nx = std::max(1, static_cast<int>(std::round((x1 - x0) / spacing)));
  const int nz = std::max(1, static_cast<int>(std::round((z1 - z0) / spacing)));
  for (int i = 0; i <= nx; ++i)
    for (int k = 0; k <= nz; ++k) c.points.emplace_back(x0 + (x1 - x0) * i / nx, y, z0 + (z1 - z0) * k / nz);
  return c;
}

inline PointCloud wall_x(double x, double y0, double y1, double z0, double z1, double spacing) {
  PointCloud c;
  const int ny = std::max(1, static_cast<int>(std::round((y1 - y0) / spacing)));
  const int nz = std::max(1, static_cast<int>(std::round((z1 - z0) / spacing)));
  for (int j = 0; j <= ny; ++j)
    for (int k = 0; k <= nz; ++k) c.points.emplace_back(x, y0 + (y1 - y0) * j / ny, z0 + (z1 - z0) * k / nz);
  return c;
}

/// Closed box surface with its bottom face at z = 0, centred in x and y.
inline PointCloud box_surface(const Vec3& size, double spacing) {
  PointCloud c;
  const Vec3 h = 0.5 * size;
  append(c, plane_patch(-h.x(), h.x(), -h.y(), h.y(), 0.0, spacing));
  append(c, plane_patch(-h.x(), h.x(), -h.y(), h.y(), size.z(), spacing));
  append(c, wall_y(-h.x(), h.x(), -h.y(), 0.0, size.z(), spacing));
  append(c, wall_y(-h.x(), h.x(), h.y(), 0.0, size.z(), spacing));
  append(c, wall_x(-h.x(), -h.y(), h.y(), 0.0, size.z(), spacing));
  append(c, wall_x(h.x(), -h.y(), h.y(), 0.0, size.z(), spacing));
  // Edges are shared by adjacent faces; drop exact duplicates.
  std::sort(c.points.begin(), c.points.end(), [](const Vec3& a, const Vec3& b) {
    return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
  });
  c.points.erase(std::unique(c.points.begin(), c.points.end()), c.points.end());
  return c;
}

/// Cylinder along +z with base at z = 0, including both caps.
inline PointCloud cylinder_surface(double r, double h, double spacing, bool top_cap = true) {
  PointCloud c;
  const int nc = std::max(6, static_cast<int>(std::round(2.0 * std::numbers::pi * r / spacing)));
  const int nh = std::max(1, static_cast<int>(std::round(h / spacing)));
  for (int i = 0; i < nc; ++i) {
    const double a = 2.0 * std::numbers::pi * i / nc;
    for (int k = 0; k <= nh; ++k) c.points.emplace_back(r * std::cos(a), r * std::sin(a), h * k / nh);
  }
  const int nr = std::max(1, static_cast<int>(std::round(r / spacing)));
  for (int ring = 0; ring < nr; ++ring) {
    const double rr = r * ring / nr;
    const int n = ring == 0 ? 1 : std::max(6, static_cast<int>(std::round(2.0 * std::numbers::pi * rr / spacing)));
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n + 0.5 * ring;
      c.points.emplace_back(rr * std::cos(a), rr * std::sin(a), 0.0);
      if (top_cap) c.points.emplace_back(rr * std::cos(a), rr * std::sin(a), h);
    }
  }
  return c;
}

/// Sphere resting on z = 0 (centre at z = r).
inline PointCloud sphere_surface(double r, double spacing) {
  PointCloud c;
  const int n = std::max(20, static_cast<int>(4.0 * std::numbers::pi * r * r / (spacing * spacing)));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double rad = std::sqrt(1.0 - z * z);
    const double a = golden * i;
    c.points.emplace_back(r * rad * std::cos(a), r * rad * std::sin(a), r + r * z);
  }
  return c;
}

/// Open-top cylinder with a half-ring handle on +x.
inline PointCloud mug_surface(double r, double h, double spacing) {
  PointCloud c = cylinder_surface(r, h, spacing, false);
  const double hr = 0.3 * h;
  const int n = std::max(6, static_cast<int>(std::round(std::numbers::pi * hr / spacing)));
  for (int i = 0; i <= n; ++i) {
    const double a = -0.5 * std::numbers::pi + std::numbers::pi * i / n;
    c.points.emplace_back(r + hr * std::cos(a), 0.0, 0.5 * h + hr * std::sin(a));
  }
  return c;
}

enum class ObjectKind { box, cylinder, sphere, mug, plate, bar };
enum class SceneKind { table_wall, shelf, table_edge, corner };

inline const char* object_name(ObjectKind k) {
  switch (k) {
    case ObjectKind::box: return "box";
    case ObjectKind::cylinder: return "bottle";
    case ObjectKind::sphere: return "ball";
    case ObjectKind::mug: return "mug";
    case ObjectKind::plate: return "plate";
    case ObjectKind::bar: return "book";
  }
  return "object";
}

inline const char* scene_verb(SceneKind k) {
  switch (k) {
    case SceneKind::table_wall: return "Place";
    case SceneKind::shelf: return "Store";
    case SceneKind::table_edge: return "Rest";
    case SceneKind::corner: return "Stow";
  }
  return "Place";
}

struct ExampleParams {
  double spacing = 0.01;      // sampling pitch for scene and object, meters
  double table_half = 0.2;    // half extent of the supporting patch
  int clutter = 3;            // random blocks standing around the object
};

/// Open box (no bottom face) standing on z = z0 with its footprint centred
/// at (cx, cy).
inline PointCloud block(double cx, double cy, double z0, const Vec3& size, double spacing) {
  PointCloud b = box_surface(size, spacing);
  std::erase_if(b.points, [](const Vec3& p) { return p.z() == 0.0; });
  for (auto& p : b.points) p += Vec3(cx, cy, z0);
  return b;
}

/// Deterministic example number `id`: the object family cycles fastest, the
/// scene family next, and sizes, gap, placement, clutter and yaw vary per id.
inline InteractionExample make_example(int id, const ExampleParams& prm = {}) {
  Rng rng(0x5eed0000ULL + static_cast<std::uint64_t>(id) * 7919ULL);
  const auto okind = static_cast<ObjectKind>(id % 6);
  const auto skind = static_cast<SceneKind>((id / 6) % 4);
  const double s = prm.spacing;

  PointCloud obj;
  switch (okind) {
    case ObjectKind::box:
      obj = box_surface({rng.uniform(0.06, 0.14), rng.uniform(0.05, 0.1), rng.uniform(0.04, 0.12)}, s);
      break;
    case ObjectKind::cylinder: obj = cylinder_surface(rng.uniform(0.025, 0.045), rng.uniform(0.1, 0.18), s); break;
    case ObjectKind::sphere: obj = sphere_surface(rng.uniform(0.03, 0.06), s); break;
    case ObjectKind::mug: obj = mug_surface(rng.uniform(0.03, 0.045), rng.uniform(0.07, 0.11), s); break;
    case ObjectKind::plate: obj = cylinder_surface(rng.uniform(0.06, 0.1), rng.uniform(0.015, 0.025), s); break;
    case ObjectKind::bar:
      obj = box_surface({rng.uniform(0.14, 0.2), rng.uniform(0.1, 0.14), rng.uniform(0.02, 0.04)}, s);
      break;
  }
  const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const Box ob = bounding_box(transformed(obj, Rigid(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))).points);
  const double height = ob.max.z() - ob.min.z();
  const double gap = rng.uniform(0.01, 0.03);
  const double L = prm.table_half;
  const Vec3 place(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), gap - ob.min.z());
  const double fx0 = place.x() + ob.min.x(), fx1 = place.x() + ob.max.x();
  const double fy0 = place.y() + ob.min.y(), fy1 = place.y() + ob.max.y();

  PointCloud scene;
  double top = 0.0;
  switch (skind) {
    case SceneKind::table_wall: {
      scene = plane_patch(-L, L, -L, L, 0.0, s);
      const double wy = std::min(fy1 + rng.uniform(0.015, 0.04), L);
      append(scene, wall_y(-L, rng.uniform(0.0, L), wy, s, 0.3, s));
      break;
    }
    case SceneKind::shelf: {
      scene = plane_patch(-L, L, -L, L, 0.0, s);
      top = gap + height + rng.uniform(0.015, 0.04);
      append(scene, plane_patch(-L, rng.uniform(0.05, L), -L, L, top, s));
      append(scene, wall_y(-L, L, L, s, top - s, s));
      break;
    }
    case SceneKind::table_edge: {
      // The table stops just past the object on +x, with a drop below.
      const double edge = fx1 - rng.uniform(0.0, 0.3) * (fx1 - fx0);
      scene = plane_patch(-L, edge, -L, L, 0.0, s);
      append(scene, wall_x(edge, -L, L, -0.15, -s, s));
      break;
    }
    case SceneKind::corner: {
      scene = plane_patch(-L, L, -L, L, 0.0, s);
      const double wy = std::min(fy1 + rng.uniform(0.015, 0.035), L);
      const double wx = std::max(fx0 - rng.uniform(0.015, 0.035), -L);
      append(scene, wall_y(wx, L, wy, s, 0.25, s));
      append(scene, wall_x(wx, -L, wy - s, s, 0.25, s));
      break;
    }
  }
  // Clutter blocks in a ring around the footprint, clear of the object.
  const Vec3 mid(0.5 * (fx0 + fx1), 0.5 * (fy0 + fy1), 0.0);
  const double reach = 0.5 * std::hypot(fx1 - fx0, fy1 - fy0);
  for (int c = 0, tries = 0; c < prm.clutter && tries < 200; ++tries) {
    const Vec3 size(rng.uniform(0.03, 0.07), rng.uniform(0.03, 0.07), rng.uniform(0.03, 0.12));
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double dist = reach + 0.5 * std::hypot(size.x(), size.y()) + rng.uniform(0.012, 0.04);
    const double cx = mid.x() + dist * std::cos(a), cy = mid.y() + dist * std::sin(a);
    const bool overlap_x = cx + 0.5 * size.x() + 0.01 > fx0 && cx - 0.5 * size.x() - 0.01 < fx1;
    const bool overlap_y = cy + 0.5 * size.y() + 0.01 > fy0 && cy - 0.5 * size.y() - 0.01 < fy1;
    if (overlap_x && overlap_y) continue;
    if (std::abs(cx) + 0.5 * size.x() > L || std::abs(cy) + 0.5 * size.y() > L) continue;
    if (top > 0.0 && size.z() > top - 2 * s) continue;
    if (skind == SceneKind::table_edge && cx + 0.5 * size.x() > fx1) continue;
    append(scene, block(cx, cy, s, size, s));
    ++c;
  }

  InteractionExample ex;
  ex.affordance_id = id;
  ex.label = std::string(scene_verb(skind)) + "-" + object_name(okind) + "-" + std::to_string(id);
  ex.query_object = std::move(obj);
  ex.scene_patch = std::move(scene);
  ex.object_pose = Eigen::Translation3d(place) * Eigen::AngleAxisd(yaw, Vec3::UnitZ());
  ex.scene_patch.frame_id = "scene";
  ex.query_object.frame_id = "object";
  return ex;
}

/// Rotates a scene about the vertical axis through `pivot`.
inline PointCloud spin_about(const PointCloud& cloud, const Vec3& pivot, int m, int orientations = kOrientations) {
  const Rigid t = Eigen::Translation3d(pivot) * Rigid(orientation_rotation(m, orientations)) *
                  Eigen::Translation3d(-pivot);
  return transformed(cloud, t);
}

}  // namespace afford::synth

#endif  // AFFORD_SYNTHETIC_HPP
