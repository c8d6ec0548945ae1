#pragma once

#include "hsp/geometry.hpp"

#include <vector>

namespace hsp {

struct ClosestPoint {
  Vec3 point;
  Vec3 barycentric;
  double squared_distance;
};

// Exact closest point on triangle (a, b, c) to p.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Bounding-volume hierarchy over mesh faces for closest-point queries.
// The mesh must outlive the BVH. Ties between faces go to the lower face id.
class FaceBvh {
public:
  explicit FaceBvh(const TriangleMesh& mesh);

  SurfacePoint closest(const Vec3& q) const;
  const TriangleMesh& mesh() const { return *mesh_; }

  // Faces whose bounding boxes overlap the given box.
  void query_box(const Vec3& lo, const Vec3& hi, std::vector<int>& out) const;

private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;
    int begin = 0, end = 0;
  };
  int build(int begin, int end);
  void search(int node, const Vec3& q, SurfacePoint& best, double& best_d2) const;

  const TriangleMesh* mesh_;
  std::vector<int> order_;
  std::vector<Vec3> lo_, hi_, centroid_;
  std::vector<Node> nodes_;
};

SurfacePoint project_point_to_mesh(const TriangleMesh& mesh, const Vec3& q);

}  // namespace hsp
