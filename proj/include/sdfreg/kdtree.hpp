// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace sdfreg {

/// @brief Minimal 3D kd-tree over an immutable point array.
///
/// Supports exact nearest-neighbor and radius queries. Construction and
/// queries are deterministic for a given input order.
class KdTree {
public:
  KdTree() = default;

  explicit KdTree(std::vector<Eigen::Vector3d> points)
      : points_(std::move(points)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(points_.size() * 2 + 1);
    if (!points_.empty())
      root_ = build(0, points_.size());
  }

  std::size_t size() const { return points_.size(); }
  const Eigen::Vector3d& point(std::size_t i) const { return points_[i]; }

  struct Nearest {
    std::size_t index{static_cast<std::size_t>(-1)};
    double squared_distance{std::numeric_limits<double>::infinity()};
    bool found() const { return index != static_cast<std::size_t>(-1); }
  };

  Nearest nearest(const Eigen::Vector3d& query) const {
    Nearest best;
    if (root_ >= 0) search_nearest(root_, query, best);
    return best;
  }

  /// Squared distance to the nearest point, infinity when the tree is empty.
  double nearest_squared_distance(const Eigen::Vector3d& query) const {
    return nearest(query).squared_distance;
  }

  /// Indices of all points within `radius` of the query, ascending.
  std::vector<std::size_t> radius_search(const Eigen::Vector3d& query,
                                         double radius) const {
    std::vector<std::size_t> out;
    if (root_ >= 0) search_radius(root_, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

private:
  struct Node {
    int left{-1};
    int right{-1};
    std::size_t begin{0};
    std::size_t end{0};  // leaf range in order_, valid when left < 0
    int axis{0};
    double split{0.0};
  };

  static constexpr std::size_t kLeafSize = 8;

  int build(std::size_t begin, std::size_t end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size() - 1);
    }
    Eigen::Vector3d lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    const Eigen::Vector3d ext = hi - lo;
    for (int a = 1; a < 3; ++a)
      if (ext[a] > ext[axis]) axis = a;
    const std::size_t mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double va = points_[a][axis], vb = points_[b][axis];
                       if (va != vb) return va < vb;
                       return a < b;  // stable tie-break for determinism
                     });
    node.axis = axis;
    node.split = points_[order_[mid]][axis];
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search_nearest(int id, const Eigen::Vector3d& q, Nearest& best) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const double d2 = (points_[idx] - q).squaredNorm();
        if (d2 < best.squared_distance ||
            (d2 == best.squared_distance && idx < best.index)) {
          best.squared_distance = d2;
          best.index = idx;
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_nearest(near, q, best);
    if (delta * delta <= best.squared_distance)
      search_nearest(far, q, best);
  }

  void search_radius(int id, const Eigen::Vector3d& q, double r2,
                     std::vector<std::size_t>& out) const {
    const Node& node = nodes_[id];
    if (node.left < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if ((points_[idx] - q).squaredNorm() <= r2) out.push_back(idx);
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const int near = delta < 0.0 ? node.left : node.right;
    const int far = delta < 0.0 ? node.right : node.left;
    search_radius(near, q, r2, out);
    if (delta * delta <= r2) search_radius(far, q, r2, out);
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_{-1};
};

}  // namespace sdfreg
