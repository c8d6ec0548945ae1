#pragma once

#include "hsp/geometry.hpp"

#include <span>
#include <vector>

namespace hsp {

struct Neighbor {
  int index = -1;
  double squared_distance = 0.0;
};

// Static 3D kd-tree for exact nearest-neighbour queries. Among points at equal
// distance the lowest index wins, so results are deterministic.
class KdTree {
public:
  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points, int leaf_size = 8);

  Neighbor nearest(const Vec3& q) const;
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

private:
  struct Node {
    int begin = 0, end = 0;  // range into order_
    int left = -1, right = -1;
    int axis = -1;           // -1 for leaves
    double split = 0.0;
    Vec3 lo, hi;
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& q, Neighbor& best) const;

  std::vector<Vec3> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int leaf_size_ = 8;
};

// Nearest neighbour in `targets` for every query point.
std::vector<Neighbor> nearest_neighbors(std::span<const Vec3> queries, const KdTree& targets);

}  // namespace hsp
