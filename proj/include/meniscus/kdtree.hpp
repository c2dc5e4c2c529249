#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <queue>
#include <vector>

#include "meniscus/error.hpp"

namespace meniscus {

template <typename Scalar>
struct Neighbor {
  std::size_t index;
  Scalar squared_distance;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Static 2-D KD-tree over a point cloud. k-nearest queries return exactly
/// what an exhaustive scan ordered by (distance, index) would return.
template <typename Scalar>
class KdTree2 {
 public:
  using Point = Eigen::Matrix<Scalar, 2, 1>;

  explicit KdTree2(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) fail(ErrorKind::kEmptyInput, "KD-tree needs at least one point");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    nodes_.reserve(points_.size());
    root_ = build(0, order_.size());
  }

  std::size_t size() const { return points_.size(); }
  const Point& point(std::size_t i) const { return points_[i]; }

  /// Up to k nearest points with squared distance <= max_squared_distance
  /// that pass `accept(index)`, sorted by (distance, index).
  template <typename Accept>
  std::vector<Neighbor<Scalar>> nearest(const Point& query, std::size_t k, Accept&& accept,
                                        Scalar max_squared_distance =
                                            std::numeric_limits<Scalar>::infinity()) const {
    std::priority_queue<Neighbor<Scalar>> best;  // max-heap on (distance, index)
    if (k > 0) search(root_, query, k, accept, max_squared_distance, best);
    std::vector<Neighbor<Scalar>> out(best.size());
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      *it = best.top();
      best.pop();
    }
    return out;
  }

  std::vector<Neighbor<Scalar>> nearest(const Point& query, std::size_t k) const {
    return nearest(query, k, [](std::size_t) { return true; });
  }

 private:
  static constexpr std::size_t kLeafSize = 8;
  static constexpr int kNone = -1;

  struct Node {
    std::size_t begin, end;  // range into order_
    int axis = -1;           // -1 marks a leaf
    Scalar split{};
    int left = kNone, right = kNone;
  };

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Point lo = points_[order_[begin]], hi = lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    const int axis = (hi - lo)(1) > (hi - lo)(0) ? 1 : 0;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return points_[a](axis) < points_[b](axis); });
    const Scalar split = points_[order_[mid]](axis);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  // Left subtree holds coordinates <= split, right subtree >= split. A subtree
  // is skipped only when its slab is strictly farther than the current k-th
  // candidate, so equal-distance points with smaller indices are still seen.
  template <typename Accept>
  void search(int id, const Point& q, std::size_t k, Accept& accept, Scalar max_d2,
              std::priority_queue<Neighbor<Scalar>>& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        const Scalar d2 = (points_[idx] - q).squaredNorm();
        if (d2 > max_d2 || !accept(idx)) continue;
        const Neighbor<Scalar> cand{idx, d2};
        if (best.size() < k) {
          best.push(cand);
        } else if (cand < best.top()) {
          best.pop();
          best.push(cand);
        }
      }
      return;
    }
    const Scalar diff = q(node.axis) - node.split;
    const int near = diff <= 0 ? node.left : node.right;
    const int far = diff <= 0 ? node.right : node.left;
    search(near, q, k, accept, max_d2, best);
    const Scalar plane_d2 = diff * diff;
    if (plane_d2 > max_d2) return;
    if (best.size() < k || plane_d2 <= best.top().squared_distance) search(far, q, k, accept, max_d2, best);
  }

  std::vector<Point> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

}  // namespace meniscus
