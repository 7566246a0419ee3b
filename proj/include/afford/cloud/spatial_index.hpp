// SPDX-License-Identifier: Apache-2.0

#ifndef AFFORD_CLOUD_SPATIAL_INDEX_HPP
#define AFFORD_CLOUD_SPATIAL_INDEX_HPP

#include "afford/core/error.hpp"
#include "afford/core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

namespace afford {

struct Neighbor {
  std::size_t index = 0;   // index into the indexed point set
  double distance = 0.0;   // Euclidean, meters

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Static kd-tree. Results match a linear scan exactly: distances are
/// computed with squared_distance() and ties go to the lowest index.
/// Immutable after construction, so concurrent queries are safe.
class SpatialIndex {
public:
  SpatialIndex() = default;

  explicit SpatialIndex(std::span<const Vec3> points, std::size_t leaf_size = 12)
      : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::uint32_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
      build(0, static_cast<std::uint32_t>(points_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Vec3>& points() const { return points_; }

  Neighbor nearest(const Vec3& q) const {
    if (empty()) fail(ErrorKind::invalid_argument, "nearest_neighbor: empty index");
    Best best;
    search_nearest(0, q, best);
    return {best.index, std::sqrt(best.d2)};
  }

  /// k nearest, sorted by (distance, index).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const {
    std::vector<Neighbor> out;
    if (empty() || k == 0) return out;
    Heap heap;
    search_knn(0, q, std::min(k, size()), heap);
    std::vector<std::pair<double, std::uint32_t>> items;
    items.reserve(heap.size());
    while (!heap.empty()) {
      items.push_back(heap.top());
      heap.pop();
    }
    std::sort(items.begin(), items.end());
    out.reserve(items.size());
    for (const auto& [d2, i] : items) out.push_back({i, std::sqrt(d2)});
    return out;
  }

  /// All points with distance <= radius, sorted by index.
  std::vector<Neighbor> radius(const Vec3& q, double r) const {
    std::vector<Neighbor> out;
    if (empty() || !(r >= 0.0)) return out;
    search_radius(0, q, r * r, out);
    std::sort(out.begin(), out.end(),
              [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
    return out;
  }

private:
  struct Node {
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
    double split = 0.0;
    int axis = -1;  // -1 for leaves
  };

  struct Best {
    double d2 = std::numeric_limits<double>::infinity();
    std::size_t index = std::numeric_limits<std::size_t>::max();
    void offer(double d, std::size_t i) {
      if (d < d2 || (d == d2 && i < index)) {
        d2 = d;
        index = i;
      }
    }
  };

  using Heap = std::priority_queue<std::pair<double, std::uint32_t>>;

  std::int32_t build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end, -1, -1, 0.0, -1});
    if (end - begin <= leaf_size_) return id;

    Box box;
    for (std::uint32_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
    Vec3 extent = box.max - box.min;
    int axis = 0;
    if (extent.y() > extent[axis]) axis = 1;
    if (extent.z() > extent[axis]) axis = 2;
    if (extent[axis] <= 0.0) return id;  // all points coincide

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       return points_[a][axis] < points_[b][axis];
                     });
    const double split = points_[order_[mid]][axis];
    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    Node& n = nodes_[id];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
  }

  void search_nearest(std::int32_t id, const Vec3& q, Best& best) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const auto idx = order_[i];
        best.offer(squared_distance(points_[idx], q), idx);
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const auto near = diff < 0.0 ? n.left : n.right;
    const auto far = diff < 0.0 ? n.right : n.left;
    search_nearest(near, q, best);
    // Points across the plane are at least |diff| away; equality must still
    // be explored so that a lower-index tie can win.
    if (diff * diff <= best.d2) search_nearest(far, q, best);
  }

  void search_knn(std::int32_t id, const Vec3& q, std::size_t k, Heap& heap) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const auto idx = order_[i];
        const std::pair<double, std::uint32_t> item{squared_distance(points_[idx], q), idx};
        if (heap.size() < k) {
          heap.push(item);
        } else if (item < heap.top()) {
          heap.pop();
          heap.push(item);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const auto near = diff < 0.0 ? n.left : n.right;
    const auto far = diff < 0.0 ? n.right : n.left;
    search_knn(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().first) search_knn(far, q, k, heap);
  }

  void search_radius(std::int32_t id, const Vec3& q, double r2, std::vector<Neighbor>& out) const {
    const Node& n = nodes_[id];
    if (n.axis < 0) {
      for (std::uint32_t i = n.begin; i < n.end; ++i) {
        const auto idx = order_[i];
        const double d2 = squared_distance(points_[idx], q);
        if (d2 <= r2) out.push_back({idx, std::sqrt(d2)});
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const auto near = diff < 0.0 ? n.left : n.right;
    const auto far = diff < 0.0 ? n.right : n.left;
    search_radius(near, q, r2, out);
    if (diff * diff <= r2) search_radius(far, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 12;
};

/// Free-function form of SpatialIndex::nearest.
inline Neighbor nearest_neighbor(const SpatialIndex& index, const Vec3& q) {
  return index.nearest(q);
}

}  // namespace afford

#endif  // AFFORD_CLOUD_SPATIAL_INDEX_HPP
