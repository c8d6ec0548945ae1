#include "hsp/convex_hull.hpp"

#include "hsp/error.hpp"

#include <Eigen/Geometry>

#include <unordered_map>
#include <vector>

namespace hsp {
namespace {

struct HullFace {
  std::array<int, 3> v;
  Vec3 normal;
  double offset = 0.0;
  std::vector<int> outside;
  bool alive = true;
};

std::uint64_t directed_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

class Quickhull {
public:
  Quickhull(std::span<const Vec3> pts, double eps) : pts_(pts), eps_(eps) {}

  TriangleMesh run() {
    initial_simplex();
    std::vector<int> stack;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) stack.push_back(f);
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      if (!faces_[f].alive || faces_[f].outside.empty()) continue;
      for (int nf : add_point(f)) stack.push_back(nf);
    }
    TriangleMesh raw;
    raw.vertices.assign(pts_.begin(), pts_.end());
    for (const HullFace& f : faces_) {
      if (f.alive) raw.faces.push_back({f.v[0], f.v[1], f.v[2]});
    }
    return compact(raw);
  }

private:
  double distance(const HullFace& f, const Vec3& p) const { return f.normal.dot(p) - f.offset; }

  int make_face(int a, int b, int c) {
    HullFace f;
    f.v = {a, b, c};
    const Vec3 n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    const double len = n.norm();
    f.normal = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    f.offset = f.normal.dot(pts_[a]);
    faces_.push_back(std::move(f));
    const int id = static_cast<int>(faces_.size()) - 1;
    for (int k = 0; k < 3; ++k) edge_face_[directed_key(faces_[id].v[k], faces_[id].v[(k + 1) % 3])] = id;
    return id;
  }

  void initial_simplex() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw DegeneracyError("convex hull needs at least 4 points");
    // Extreme points along the axes seed the first edge.
    std::array<int, 6> ext{0, 0, 0, 0, 0, 0};
    for (int i = 1; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        if (pts_[i][k] < pts_[ext[2 * k]][k]) ext[2 * k] = i;
        if (pts_[i][k] > pts_[ext[2 * k + 1]][k]) ext[2 * k + 1] = i;
      }
    }
    int i0 = ext[0], i1 = ext[1];
    double best = -1.0;
    for (int a = 0; a < 6; ++a) {
      for (int b = a + 1; b < 6; ++b) {
        const double d = (pts_[ext[a]] - pts_[ext[b]]).squaredNorm();
        if (d > best) {
          best = d;
          i0 = ext[a];
          i1 = ext[b];
        }
      }
    }
    if (std::sqrt(best) <= eps_) throw DegeneracyError("convex hull input points are coincident");

    const Vec3 dir = (pts_[i1] - pts_[i0]).normalized();
    int i2 = -1;
    best = eps_;
    for (int i = 0; i < n; ++i) {
      const Vec3 r = pts_[i] - pts_[i0];
      const double d = (r - r.dot(dir) * dir).norm();
      if (d > best) {
        best = d;
        i2 = i;
      }
    }
    if (i2 < 0) throw DegeneracyError("convex hull input points are collinear");

    const Vec3 pn = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]).normalized();
    int i3 = -1;
    best = eps_;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(pn.dot(pts_[i] - pts_[i0]));
      if (d > best) {
        best = d;
        i3 = i;
      }
    }
    if (i3 < 0) throw DegeneracyError("convex hull input points are coplanar");

    if (pn.dot(pts_[i3] - pts_[i0]) > 0.0) std::swap(i1, i2);  // i3 must lie below (i0,i1,i2)
    make_face(i0, i1, i2);
    make_face(i0, i3, i1);
    make_face(i1, i3, i2);
    make_face(i2, i3, i0);

    for (int i = 0; i < n; ++i) {
      if (i == i0 || i == i1 || i == i2 || i == i3) continue;
      assign(i, {0, 1, 2, 3});
    }
  }

  void assign(int p, const std::vector<int>& candidates) {
    int best_face = -1;
    double best = eps_;
    for (int f : candidates) {
      const double d = distance(faces_[f], pts_[p]);
      if (d > best) {
        best = d;
        best_face = f;
      }
    }
    if (best_face >= 0) faces_[best_face].outside.push_back(p);
  }

  std::vector<int> add_point(int start) {
    // Farthest outside point of the face becomes the new hull vertex.
    HullFace& sf = faces_[start];
    int eye = sf.outside.front();
    double far = distance(sf, pts_[eye]);
    for (int p : sf.outside) {
      const double d = distance(sf, pts_[p]);
      if (d > far || (d == far && p < eye)) {
        far = d;
        eye = p;
      }
    }
    const Vec3& e = pts_[eye];

    std::vector<int> visible{start};
    std::vector<char> is_visible(faces_.size(), 0);
    is_visible[start] = 1;
    for (std::size_t i = 0; i < visible.size(); ++i) {
      const HullFace& f = faces_[visible[i]];
      for (int k = 0; k < 3; ++k) {
        const int nb = edge_face_.at(directed_key(f.v[(k + 1) % 3], f.v[k]));
        if (is_visible[nb]) continue;
        if (distance(faces_[nb], e) > eps_) {
          is_visible[nb] = 1;
          visible.push_back(nb);
        }
      }
    }

    std::vector<std::pair<int, int>> horizon;
    std::vector<int> orphans;
    for (int fi : visible) {
      HullFace& f = faces_[fi];
      for (int k = 0; k < 3; ++k) {
        const int a = f.v[k], b = f.v[(k + 1) % 3];
        const int nb = edge_face_.at(directed_key(b, a));
        if (nb >= static_cast<int>(is_visible.size()) || !is_visible[nb]) horizon.emplace_back(a, b);
      }
      for (int p : f.outside) {
        if (p != eye) orphans.push_back(p);
      }
      f.outside.clear();
      f.alive = false;
    }
    for (int fi : visible) {
      const HullFace& f = faces_[fi];
      for (int k = 0; k < 3; ++k) {
        auto it = edge_face_.find(directed_key(f.v[k], f.v[(k + 1) % 3]));
        if (it != edge_face_.end() && it->second == fi) edge_face_.erase(it);
      }
    }

    std::vector<int> created;
    created.reserve(horizon.size());
    for (const auto& [a, b] : horizon) created.push_back(make_face(a, b, eye));
    for (int p : orphans) assign(p, created);
    return created;
  }

  std::span<const Vec3> pts_;
  double eps_;
  std::vector<HullFace> faces_;
  std::unordered_map<std::uint64_t, int> edge_face_;
};

}  // namespace

TriangleMesh convex_hull(std::span<const Vec3> points, double relative_tolerance) {
  if (points.size() < 4) throw DegeneracyError("convex hull needs at least 4 points");
  std::vector<Vec3> pts(points.begin(), points.end());
  const double scale = bounding_box(pts).longest();
  if (!(scale > 0.0)) throw DegeneracyError("convex hull input points are coincident");
  Quickhull qh(points, relative_tolerance * scale);
  return qh.run();
}

}  // namespace hsp
