#include "hsp/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace hsp {

KdTree::KdTree(std::span<const Vec3> points, int leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max(1, leaf_size)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<int>(points_.size()), 0);
  }
}

int KdTree::build(int begin, int end, int depth) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  if (end - begin <= leaf_size_) return id;

  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double pa = points_[a][axis], pb = points_[b][axis];
    return pa < pb || (pa == pb && a < b);
  });
  nodes_[id].axis = axis;
  nodes_[id].split = points_[order_[mid]][axis];
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

double box_distance2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double v = q[k] < lo[k] ? lo[k] - q[k] : (q[k] > hi[k] ? q[k] - hi[k] : 0.0);
    d += v * v;
  }
  return d;
}

}  // namespace

void KdTree::search(int node_id, const Vec3& q, Neighbor& best) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d = (points_[idx] - q).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && idx < best.index)) {
        best.squared_distance = d;
        best.index = idx;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const int first = diff < 0.0 ? node.left : node.right;
  const int second = diff < 0.0 ? node.right : node.left;
  // `<=` keeps equal-distance candidates reachable for the lowest-index rule.
  if (box_distance2(q, nodes_[first].lo, nodes_[first].hi) <= best.squared_distance) search(first, q, best);
  if (box_distance2(q, nodes_[second].lo, nodes_[second].hi) <= best.squared_distance) search(second, q, best);
}

Neighbor KdTree::nearest(const Vec3& q) const {
  Neighbor best{-1, std::numeric_limits<double>::infinity()};
  if (!points_.empty()) search(0, q, best);
  return best;
}

std::vector<Neighbor> nearest_neighbors(std::span<const Vec3> queries, const KdTree& targets) {
  std::vector<Neighbor> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = targets.nearest(queries[i]);
  return out;
}

}  // namespace hsp
