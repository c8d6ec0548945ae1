#include "hsp/shapes.hpp"

#include "hsp/error.hpp"

#include <cmath>
#include <map>
#include <unordered_map>

namespace hsp {

TriangleMesh tetrahedron() {
  TriangleMesh m;
  m.vertices = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return m;
}

TriangleMesh icosahedron() {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  TriangleMesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return m;
}

TriangleMesh icosphere(int level, double radius) {
  if (level < 0) throw ParameterError("icosphere level must be >= 0");
  TriangleMesh m = icosahedron();
  for (int i = 0; i < level; ++i) {
    std::unordered_map<std::uint64_t, int> mid;
    std::vector<Face> faces;
    faces.reserve(m.faces.size() * 4);
    auto midpoint = [&](int a, int b) {
      const auto [it, inserted] = mid.try_emplace(edge_key(a, b), m.num_vertices());
      if (inserted) m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      return it->second;
    };
    for (const Face& f : m.faces) {
      const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (Vec3& v : m.vertices) v *= radius;
  return m;
}

TriangleMesh cube(int n, double h) {
  if (n < 1) throw ParameterError("cube subdivision must be >= 1");
  TriangleMesh m;
  std::map<std::array<int, 3>, int> index;
  auto vertex = [&](const std::array<int, 3>& g) {
    const auto [it, inserted] = index.try_emplace(g, m.num_vertices());
    if (inserted) m.vertices.emplace_back(h * (2.0 * g[0] / n - 1.0), h * (2.0 * g[1] / n - 1.0), h * (2.0 * g[2] / n - 1.0));
    return it->second;
  };
  // For each side: fixed axis, its value, and two in-plane axes ordered so the normal points out.
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      int u = (axis + 1) % 3, v = (axis + 2) % 3;
      if (side == 0) std::swap(u, v);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          auto g = [&](int a, int b) {
            std::array<int, 3> p{};
            p[axis] = side == 1 ? n : 0;
            p[u] = a;
            p[v] = b;
            return vertex(p);
          };
          const int v00 = g(i, j), v10 = g(i + 1, j), v11 = g(i + 1, j + 1), v01 = g(i, j + 1);
          m.faces.push_back({v00, v10, v11});
          m.faces.push_back({v00, v11, v01});
        }
      }
    }
  }
  return m;
}

TriangleMesh torus(double major, double minor, int nu, int nv) {
  if (nu < 3 || nv < 3) throw ParameterError("torus needs at least 3 x 3 segments");
  TriangleMesh m;
  for (int i = 0; i < nu; ++i) {
    const double a = 2.0 * M_PI * i / nu;
    for (int j = 0; j < nv; ++j) {
      const double b = 2.0 * M_PI * j / nv;
      m.vertices.emplace_back((major + minor * std::cos(b)) * std::cos(a), (major + minor * std::cos(b)) * std::sin(a),
                              minor * std::sin(b));
    }
  }
  auto id = [&](int i, int j) { return (i % nu) * nv + (j % nv); };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return m;
}

Vec3 TexturedMesh::color_at(const Vec2& uv) const {
  const int n = texture.width;
  const double r = std::clamp(uv.y() * n - 0.5, 0.0, n - 1.0), c = std::clamp(uv.x() * n - 0.5, 0.0, n - 1.0);
  const int r0 = static_cast<int>(r), c0 = static_cast<int>(c);
  const int r1 = std::min(r0 + 1, n - 1), c1 = std::min(c0 + 1, n - 1);
  const double wr = r - r0, wc = c - c0;
  auto px = [&](int rr, int cc) -> Vec3 {
    const std::uint8_t* p = texture.pixel(rr, cc);
    return Vec3(p[0], p[1], p[2]) / 255.0;
  };
  return (1 - wr) * ((1 - wc) * px(r0, c0) + wc * px(r0, c1)) + wr * ((1 - wc) * px(r1, c0) + wc * px(r1, c1));
}

TexturedMesh paint_mesh(const TriangleMesh& mesh, int resolution,
                        const std::function<Vec3(int, const Vec3&)>& color) {
  TexturedMesh out;
  out.mesh = mesh;
  out.atlas = generate_atlas(mesh, resolution);
  const DenseUVMap positions = rasterize_vertex_attribute(mesh, out.atlas, mesh.vertices, ChannelKind::XYZ);
  DenseUVMap colors;
  colors.kind = ChannelKind::RGB;
  colors.map = FeatureMap(resolution, resolution, 3);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      const int f = out.atlas.pixel_face[static_cast<std::size_t>(r) * resolution + c];
      if (f >= 0) colors.set(r, c, color(f, positions.at(r, c)));
    }
  }
  out.texture = bake_texture(out.atlas, colors);
  return out;
}

const std::array<Vec3, 6>& cube_face_colors() {
  static const std::array<Vec3, 6> colors = {Vec3(0.9, 0.1, 0.1), Vec3(0.1, 0.8, 0.1), Vec3(0.1, 0.2, 0.9),
                                             Vec3(0.9, 0.9, 0.1), Vec3(0.1, 0.9, 0.9), Vec3(0.8, 0.1, 0.8)};
  return colors;
}

int cube_side(const Vec3& n) {
  int axis = 0;
  for (int k = 1; k < 3; ++k) {
    if (std::abs(n[k]) > std::abs(n[axis])) axis = k;
  }
  return 2 * axis + (n[axis] >= 0 ? 0 : 1);
}

TexturedMesh textured_cube(int n, int resolution) {
  const TriangleMesh m = cube(n, 0.5);
  return paint_mesh(m, resolution, [&](int f, const Vec3&) { return cube_face_colors()[cube_side(face_normal(m, f))]; });
}

TexturedMesh textured_sphere(int level, int resolution) {
  const TriangleMesh m = icosphere(level, 0.5);
  return paint_mesh(m, resolution, [](int, const Vec3& p) {
    const Vec3 d = p.normalized();
    const double lat = std::asin(std::clamp(d.z(), -1.0, 1.0));
    const double lon = std::atan2(d.y(), d.x());
    return Vec3(0.5 + 0.4 * std::sin(3.0 * lat), 0.5 + 0.4 * std::cos(2.0 * lon), 0.5 + 0.3 * d.x());
  });
}

}  // namespace hsp
