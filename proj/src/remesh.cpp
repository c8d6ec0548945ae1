#include "hsp/remesh.hpp"

#include "hsp/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>
#include <unordered_map>

namespace hsp {

TriangleMesh subdivide_midpoint(const TriangleMesh& mesh) {
  TriangleMesh out;
  out.vertices = mesh.vertices;
  out.faces.reserve(mesh.faces.size() * 4);
  std::unordered_map<std::uint64_t, int> mid;
  auto midpoint = [&](int a, int b) {
    const auto [it, inserted] = mid.try_emplace(edge_key(a, b), static_cast<int>(out.vertices.size()));
    if (inserted) out.vertices.push_back(0.5 * (mesh.vertices[a] + mesh.vertices[b]));
    return it->second;
  };
  for (const Face& t : mesh.faces) {
    const int ab = midpoint(t[0], t[1]);
    const int bc = midpoint(t[1], t[2]);
    const int ca = midpoint(t[2], t[0]);
    out.faces.push_back({t[0], ab, ca});
    out.faces.push_back({t[1], bc, ab});
    out.faces.push_back({t[2], ca, bc});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

namespace {

using Quadric = Eigen::Matrix4d;

class Decimator {
public:
  Decimator(const TriangleMesh& mesh, double length_weight)
      : pos_(mesh.vertices), faces_(mesh.faces), length_weight_(length_weight) {
    const int nv = mesh.num_vertices();
    face_alive_.assign(faces_.size(), 1);
    vertex_alive_.assign(nv, 1);
    version_.assign(nv, 0);
    vfaces_.assign(nv, {});
    quadric_.assign(nv, Quadric::Zero());
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      for (int k = 0; k < 3; ++k) vfaces_[faces_[f][k]].push_back(f);
      const Vec3& a = pos_[faces_[f][0]];
      Vec3 n = (pos_[faces_[f][1]] - a).cross(pos_[faces_[f][2]] - a);
      const double len = n.norm();
      if (len <= 0.0) continue;
      n /= len;
      Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(a));
      const Quadric q = plane * plane.transpose();
      for (int k = 0; k < 3; ++k) quadric_[faces_[f][k]] += q;
    }
    alive_vertices_ = nv;
  }

  TriangleMesh run(int target) {
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      for (int k = 0; k < 3; ++k) {
        const int a = faces_[f][k], b = faces_[f][(k + 1) % 3];
        if (a < b) push(a, b);
      }
    }
    while (alive_vertices_ > std::max(target, 4) && !queue_.empty()) {
      const Candidate c = queue_.top();
      queue_.pop();
      if (!vertex_alive_[c.u] || !vertex_alive_[c.v]) continue;
      if (version_[c.u] != c.version_u || version_[c.v] != c.version_v) continue;
      collapse(c);
    }
    TriangleMesh out;
    out.vertices = pos_;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      if (face_alive_[f]) out.faces.push_back(faces_[f]);
    }
    return compact(out);
  }

private:
  struct Candidate {
    double cost;
    int u, v;
    int version_u, version_v;
    Vec3 target;
    bool operator<(const Candidate& o) const {
      // std::priority_queue is a max-heap; invert for smallest cost first.
      return std::tie(cost, u, v) > std::tie(o.cost, o.u, o.v);
    }
  };

  double quadric_error(const Quadric& q, const Vec3& p) const {
    const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return std::max(0.0, h.dot(q * h));
  }

  void push(int u, int v) {
    if (u > v) std::swap(u, v);
    const Quadric q = quadric_[u] + quadric_[v];
    const Vec3 mid = 0.5 * (pos_[u] + pos_[v]);
    Vec3 best = mid;
    double best_err = quadric_error(q, mid);
    for (const Vec3& p : {pos_[u], pos_[v]}) {
      const double e = quadric_error(q, p);
      if (e < best_err) {
        best_err = e;
        best = p;
      }
    }
    const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
    const double len = (pos_[u] - pos_[v]).norm();
    if (lu.isInvertible() && lu.rcond() > 1e-8) {
      const Vec3 opt = lu.solve(-q.topRightCorner<3, 1>());
      if ((opt - mid).norm() <= len) {
        const double e = quadric_error(q, opt);
        if (e < best_err) {
          best_err = e;
          best = opt;
        }
      }
    }
    queue_.push({best_err + length_weight_ * len * len, u, v, version_[u], version_[v], best});
  }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vfaces_[v]) {
      if (!face_alive_[f]) continue;
      for (int k = 0; k < 3; ++k) {
        if (faces_[f][k] != v) out.push_back(faces_[f][k]);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // 4*sqrt(3)*area / sum of squared edge lengths; 1 for equilateral.
  static double quality(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double l2 = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
    if (l2 <= 0.0) return 0.0;
    return 2.0 * std::sqrt(3.0) * (b - a).cross(c - a).norm() / l2;
  }

  bool collapse(const Candidate& c) {
    const int u = c.u, v = c.v;
    std::vector<int> shared_faces;
    std::vector<int> opposite;
    for (int f : vfaces_[u]) {
      if (!face_alive_[f]) continue;
      const Face& t = faces_[f];
      if (t[0] == v || t[1] == v || t[2] == v) {
        shared_faces.push_back(f);
        for (int k = 0; k < 3; ++k) {
          if (t[k] != u && t[k] != v) opposite.push_back(t[k]);
        }
      }
    }
    if (shared_faces.size() != 2) return false;

    // Link condition: the one-rings of u and v intersect only in the two opposite vertices.
    const std::vector<int> nu = neighbors(u), nv = neighbors(v);
    std::vector<int> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    std::sort(opposite.begin(), opposite.end());
    if (common != opposite) return false;
    for (int w : opposite) {
      if (neighbors(w).size() <= 3) return false;
    }

    // Reject moves that flip or squash any surviving face.
    for (int x : {u, v}) {
      for (int f : vfaces_[x]) {
        if (!face_alive_[f]) continue;
        if (std::find(shared_faces.begin(), shared_faces.end(), f) != shared_faces.end()) continue;
        Face t = faces_[f];
        const Vec3 before = (pos_[t[1]] - pos_[t[0]]).cross(pos_[t[2]] - pos_[t[0]]);
        std::array<Vec3, 3> p{pos_[t[0]], pos_[t[1]], pos_[t[2]]};
        for (int k = 0; k < 3; ++k) {
          if (t[k] == x) p[k] = c.target;
        }
        const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
        const double la = after.norm(), lb = before.norm();
        if (la <= 1e-14 || lb <= 0.0) return false;
        if (before.dot(after) < 0.2 * la * lb) return false;
        const double q_after = quality(p[0], p[1], p[2]);
        if (q_after < 0.1 && q_after < quality(pos_[t[0]], pos_[t[1]], pos_[t[2]])) return false;
      }
    }

    for (int f : shared_faces) face_alive_[f] = 0;
    for (int f : vfaces_[v]) {
      if (!face_alive_[f]) continue;
      for (int k = 0; k < 3; ++k) {
        if (faces_[f][k] == v) faces_[f][k] = u;
      }
      vfaces_[u].push_back(f);
    }
    vfaces_[v].clear();
    vertex_alive_[v] = 0;
    --alive_vertices_;
    pos_[u] = c.target;
    quadric_[u] += quadric_[v];
    ++version_[u];
    auto& fl = vfaces_[u];
    fl.erase(std::remove_if(fl.begin(), fl.end(), [&](int f) { return !face_alive_[f]; }), fl.end());
    for (int w : neighbors(u)) push(u, w);
    return true;
  }

  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  double length_weight_;
  std::vector<char> face_alive_, vertex_alive_;
  std::vector<int> version_;
  std::vector<std::vector<int>> vfaces_;
  std::vector<Quadric> quadric_;
  std::priority_queue<Candidate> queue_;
  int alive_vertices_ = 0;
};

}  // namespace

TriangleMesh decimate_qem(const TriangleMesh& mesh, int target_vertices, double length_weight) {
  Decimator d(mesh, length_weight);
  return d.run(target_vertices);
}

TriangleMesh SubdivisionDecimationRemesher::remesh(const TriangleMesh& mesh, int target_vertices) const {
  if (target_vertices < 4) throw ParameterError("remesh target must be at least 4 vertices");
  if (!is_watertight(mesh)) throw TopologyError("remesh requires a watertight mesh");
  TriangleMesh out = compact(mesh);
  const double lo = (1.0 - tolerance_) * target_vertices;
  const double hi = (1.0 + tolerance_) * target_vertices;
  while (out.num_vertices() < lo) out = subdivide_midpoint(out);
  if (out.num_vertices() > hi) out = decimate_qem(out, target_vertices);
  return out;
}

TriangleMesh remesh_to_resolution(const TriangleMesh& mesh, int target_vertices) {
  return SubdivisionDecimationRemesher().remesh(mesh, target_vertices);
}

}  // namespace hsp
