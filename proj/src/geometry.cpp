#include "hsp/geometry.hpp"

#include "hsp/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace hsp {

void validate(const PointCloud& cloud) {
  std::ostringstream err;
  if (cloud.positions.size() < 4) err << "point cloud needs at least 4 points, got " << cloud.size() << "; ";
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    if (!cloud.positions[i].allFinite()) {
      err << "non-finite position at index " << i << "; ";
      break;
    }
  }
  if (cloud.colors) {
    if (cloud.colors->size() != cloud.positions.size()) {
      err << "color count " << cloud.colors->size() << " != point count " << cloud.positions.size() << "; ";
    } else {
      for (std::size_t i = 0; i < cloud.colors->size(); ++i) {
        const Vec3& c = (*cloud.colors)[i];
        if (!c.allFinite() || c.minCoeff() < 0.0 || c.maxCoeff() > 1.0) {
          err << "color out of [0,1] at index " << i << "; ";
          break;
        }
      }
    }
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw ParameterError("invalid point cloud: " + msg.substr(0, msg.size() - 2));
}

std::vector<std::string> mesh_violations(const TriangleMesh& mesh, double min_area) {
  std::vector<std::string> out;
  const int nv = mesh.num_vertices();
  std::vector<char> referenced(nv, 0);
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces[f];
    bool in_range = true;
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= nv) {
        out.push_back("face " + std::to_string(f) + " has out-of-range index " + std::to_string(t[k]));
        in_range = false;
      }
    }
    if (!in_range) continue;
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      out.push_back("face " + std::to_string(f) + " repeats a vertex");
      continue;
    }
    for (int k = 0; k < 3; ++k) referenced[t[k]] = 1;
    if (face_area(mesh, f) <= min_area) out.push_back("face " + std::to_string(f) + " is degenerate");
  }
  for (int v = 0; v < nv; ++v) {
    if (!mesh.vertices[v].allFinite()) out.push_back("vertex " + std::to_string(v) + " is not finite");
    if (!referenced[v]) out.push_back("vertex " + std::to_string(v) + " is unreferenced");
  }
  return out;
}

BoundingBox bounding_box(const std::vector<Vec3>& points) {
  BoundingBox box;
  for (const Vec3& p : points) box.extend(p);
  return box;
}

Normalization normalization_for(const std::vector<Vec3>& points) {
  Normalization n;
  if (points.empty()) return n;
  Vec3 c = Vec3::Zero();
  for (const Vec3& p : points) c += p;
  n.center = c / static_cast<double>(points.size());
  const double longest = bounding_box(points).longest();
  n.scale = longest > 0.0 ? 1.0 / longest : 1.0;
  return n;
}

PointCloud normalized(const PointCloud& cloud, const Normalization& n) {
  PointCloud out = cloud;
  for (Vec3& p : out.positions) p = n.apply(p);
  return out;
}

TriangleMesh transformed(const TriangleMesh& mesh, const Normalization& n) {
  TriangleMesh out = mesh;
  for (Vec3& p : out.vertices) p = n.apply(p);
  return out;
}

TriangleMesh untransformed(const TriangleMesh& mesh, const Normalization& n) {
  TriangleMesh out = mesh;
  for (Vec3& p : out.vertices) p = n.invert(p);
  return out;
}

double face_area(const TriangleMesh& mesh, int f) {
  const Face& t = mesh.faces[f];
  const Vec3& a = mesh.vertices[t[0]];
  return 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
}

Vec3 face_normal(const TriangleMesh& mesh, int f) {
  const Face& t = mesh.faces[f];
  const Vec3& a = mesh.vertices[t[0]];
  const Vec3 n = (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

Vec3 face_centroid(const TriangleMesh& mesh, int f) {
  const Face& t = mesh.faces[f];
  return (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
}

double surface_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (int f = 0; f < mesh.num_faces(); ++f) a += face_area(mesh, f);
  return a;
}

double signed_volume(const TriangleMesh& mesh) {
  double v = 0.0;
  for (const Face& t : mesh.faces) {
    v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  return v / 6.0;
}

int euler_characteristic(const TriangleMesh& mesh) {
  std::unordered_set<std::uint64_t> edges;
  std::unordered_set<int> used;
  for (const Face& t : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      edges.insert(edge_key(t[k], t[(k + 1) % 3]));
      used.insert(t[k]);
    }
  }
  return static_cast<int>(used.size()) - static_cast<int>(edges.size()) + mesh.num_faces();
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) return false;
  // Directed half-edge counts: each must appear once and its twin once.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.faces.size() * 3);
  for (const Face& t : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (a == b) return false;
      const std::uint64_t key = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
                                static_cast<std::uint32_t>(b);
      if (++directed[key] > 1) return false;
    }
  }
  for (const auto& [key, count] : directed) {
    const std::uint64_t twin = (key << 32) | (key >> 32);
    if (directed.find(twin) == directed.end()) return false;
  }
  return true;
}

TriangleMesh compact(const TriangleMesh& mesh) {
  std::vector<int> remap(mesh.vertices.size(), -1);
  TriangleMesh out;
  out.faces.reserve(mesh.faces.size());
  for (const Face& t : mesh.faces) {
    Face nt;
    for (int k = 0; k < 3; ++k) {
      int& r = remap[t[k]];
      if (r < 0) {
        r = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[t[k]]);
      }
      nt[k] = r;
    }
    out.faces.push_back(nt);
  }
  return out;
}

std::vector<double> edge_lengths(const TriangleMesh& mesh) {
  std::unordered_set<std::uint64_t> seen;
  std::vector<double> out;
  for (const Face& t : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      if (seen.insert(edge_key(a, b)).second) out.push_back((mesh.vertices[a] - mesh.vertices[b]).norm());
    }
  }
  return out;
}

}  // namespace hsp
