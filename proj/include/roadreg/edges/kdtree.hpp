// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0

#ifndef ROADREG_EDGES_KDTREE_HPP
#define ROADREG_EDGES_KDTREE_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "roadreg/core/types.hpp"

namespace roadreg {

struct Neighbor {
  std::size_t index = 0;
  double dist2 = 0.0;
};

/// Static 2-d tree with exact k-nearest-neighbor queries. Build once, then
/// queries are read-only and may run concurrently.
class KdTree2D {
 public:
  KdTree2D() = default;
  explicit KdTree2D(std::span<const Vec2> points, std::size_t leaf_size = 8)
      : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) build(0, points_.size());
  }

  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] const Vec2& point(std::size_t i) const { return points_[i]; }
  [[nodiscard]] const std::vector<Vec2>& points() const { return points_; }

  /// The min(k, size()) nearest points, sorted by (distance, index).
  [[nodiscard]] std::vector<Neighbor> knn(const Vec2& query, std::size_t k) const {
    std::vector<Neighbor> out;
    k = std::min(k, points_.size());
    if (k == 0) return out;
    Heap heap(Worse{});
    search(0, query, k, heap);
    out.reserve(heap.size());
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in order_
    int axis = -1;                   // -1: leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  // max-heap on (dist2, index): top is the current worst candidate
  struct Worse {
    bool operator()(const Neighbor& a, const Neighbor& b) const {
      return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }
  };
  using Heap = std::priority_queue<Neighbor, std::vector<Neighbor>, Worse>;

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;
    Eigen::Vector2d lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    const int axis = (hi - lo).x() >= (hi - lo).y() ? 0 : 1;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void offer(Heap& heap, std::size_t k, Neighbor cand) const {
    if (heap.size() < k) {
      heap.push(cand);
    } else if (Worse{}(cand, heap.top())) {
      heap.pop();
      heap.push(cand);
    }
  }

  void search(std::size_t node_id, const Vec2& q, std::size_t k, Heap& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        offer(heap, k, {idx, (points_[idx] - q).squaredNorm()});
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff < 0 ? node.left : node.right;
    const std::size_t far = diff < 0 ? node.right : node.left;
    search(near, q, k, heap);
    // equality keeps index-based tie-breaking exact
    if (heap.size() < k || diff * diff <= heap.top().dist2) search(far, q, k, heap);
  }

  std::vector<Vec2> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 8;
};

}  // namespace roadreg

#endif  // ROADREG_EDGES_KDTREE_HPP
