#include "hsp/projection.hpp"

#include "hsp/error.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace hsp {

// Region-based closest point (Ericson, Real-Time Collision Detection 5.1.5),
// returning barycentric weights alongside the point.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  auto make = [&](double wa, double wb, double wc) {
    ClosestPoint r;
    r.barycentric = Vec3(wa, wb, wc);
    r.point = wa * a + wb * b + wc * c;
    r.squared_distance = (r.point - p).squaredNorm();
    return r;
  };
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return make(1, 0, 0);

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return make(0, 1, 0);

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return make(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return make(0, 0, 1);

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return make(1 - w, 0, w);
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return make(0, 1 - w, w);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return make(1 - v - w, v, w);
}

FaceBvh::FaceBvh(const TriangleMesh& mesh) : mesh_(&mesh) {
  const int nf = mesh.num_faces();
  if (nf == 0) throw ParameterError("BVH over an empty mesh");
  lo_.resize(nf);
  hi_.resize(nf);
  centroid_.resize(nf);
  for (int f = 0; f < nf; ++f) {
    const Face& t = mesh.faces[f];
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    lo_[f] = a.cwiseMin(b).cwiseMin(c);
    hi_[f] = a.cwiseMax(b).cwiseMax(c);
    centroid_[f] = (a + b + c) / 3.0;
  }
  order_.resize(nf);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * nf);
  build(0, nf);
}

int FaceBvh::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({});
  Vec3 lo = lo_[order_[begin]], hi = hi_[order_[begin]];
  Vec3 clo = centroid_[order_[begin]], chi = clo;
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(lo_[order_[i]]);
    hi = hi.cwiseMax(hi_[order_[i]]);
    clo = clo.cwiseMin(centroid_[order_[i]]);
    chi = chi.cwiseMax(centroid_[order_[i]]);
  }
  nodes_[id].lo = lo;
  nodes_[id].hi = hi;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= 4) return id;
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double ca = centroid_[a][axis], cb = centroid_[b][axis];
    return ca < cb || (ca == cb && a < b);
  });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

namespace {

double box_distance2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - q).cwiseMax(Vec3::Zero()).cwiseMax(q - hi);
  return d.squaredNorm();
}

}  // namespace

void FaceBvh::search(int node_id, const Vec3& q, SurfacePoint& best, double& best_d2) const {
  const Node& node = nodes_[node_id];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int f = order_[i];
      const Face& t = mesh_->faces[f];
      const ClosestPoint cp =
          closest_point_on_triangle(q, mesh_->vertices[t[0]], mesh_->vertices[t[1]], mesh_->vertices[t[2]]);
      if (cp.squared_distance < best_d2 || (cp.squared_distance == best_d2 && f < best.face_id)) {
        best_d2 = cp.squared_distance;
        best.face_id = f;
        best.barycentric = cp.barycentric;
        best.position = cp.point;
      }
    }
    return;
  }
  const double dl = box_distance2(q, nodes_[node.left].lo, nodes_[node.left].hi);
  const double dr = box_distance2(q, nodes_[node.right].lo, nodes_[node.right].hi);
  const int first = dl <= dr ? node.left : node.right;
  const int second = dl <= dr ? node.right : node.left;
  const double dfirst = std::min(dl, dr), dsecond = std::max(dl, dr);
  if (dfirst <= best_d2) search(first, q, best, best_d2);
  if (dsecond <= best_d2) search(second, q, best, best_d2);
}

SurfacePoint FaceBvh::closest(const Vec3& q) const {
  SurfacePoint best;
  double d2 = std::numeric_limits<double>::infinity();
  search(0, q, best, d2);
  return best;
}

void FaceBvh::query_box(const Vec3& lo, const Vec3& hi, std::vector<int>& out) const {
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[stack.back()];
    stack.pop_back();
    if ((n.lo.array() > hi.array()).any() || (n.hi.array() < lo.array()).any()) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const int f = order_[i];
        if ((lo_[f].array() <= hi.array()).all() && (hi_[f].array() >= lo.array()).all()) out.push_back(f);
      }
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
}

SurfacePoint project_point_to_mesh(const TriangleMesh& mesh, const Vec3& q) {
  return FaceBvh(mesh).closest(q);
}

}  // namespace hsp
