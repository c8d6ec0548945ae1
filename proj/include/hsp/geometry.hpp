#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace hsp {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Input supervision: positions with optional per-point RGB in [0,1].
struct PointCloud {
  std::vector<Vec3> positions;
  std::optional<std::vector<Vec3>> colors;

  std::size_t size() const { return positions.size(); }
  bool has_colors() const { return colors.has_value(); }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_faces() const { return static_cast<int>(faces.size()); }
};

// A point on a mesh surface, located by face and barycentric weights.
struct SurfacePoint {
  int face_id = -1;
  Vec3 barycentric = Vec3::Zero();
  Vec3 position = Vec3::Zero();
};

// Similarity transform x' = (x - center) * scale.
struct Normalization {
  Vec3 center = Vec3::Zero();
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
  Vec3 invert(const Vec3& p) const { return p / scale + center; }
};

// Throws ParameterError listing every violated PointCloud invariant.
void validate(const PointCloud& cloud);

// Returns human-readable violations of the TriangleMesh invariants (empty if valid).
std::vector<std::string> mesh_violations(const TriangleMesh& mesh, double min_area = 1e-12);

// Centroid to origin, longest bounding-box side to 1.
Normalization normalization_for(const std::vector<Vec3>& points);
PointCloud normalized(const PointCloud& cloud, const Normalization& n);
TriangleMesh transformed(const TriangleMesh& mesh, const Normalization& n);
TriangleMesh untransformed(const TriangleMesh& mesh, const Normalization& n);

struct BoundingBox {
  Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  Vec3 extent() const { return max - min; }
  double longest() const { return extent().maxCoeff(); }
};

BoundingBox bounding_box(const std::vector<Vec3>& points);

double face_area(const TriangleMesh& mesh, int f);
Vec3 face_normal(const TriangleMesh& mesh, int f);  // unit; zero for degenerate faces
Vec3 face_centroid(const TriangleMesh& mesh, int f);
double surface_area(const TriangleMesh& mesh);
double signed_volume(const TriangleMesh& mesh);

// V - E + F using the undirected edge set of the faces.
int euler_characteristic(const TriangleMesh& mesh);

// Every undirected edge shared by exactly two faces with opposite orientation.
bool is_watertight(const TriangleMesh& mesh);

// Drops unreferenced vertices and reindexes faces.
TriangleMesh compact(const TriangleMesh& mesh);

std::vector<double> edge_lengths(const TriangleMesh& mesh);

inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace hsp
