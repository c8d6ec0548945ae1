#pragma once

#include "hsp/atlas.hpp"
#include "hsp/geometry.hpp"
#include "hsp/image.hpp"

#include <functional>

namespace hsp {

TriangleMesh tetrahedron();
TriangleMesh icosahedron();  // unit circumradius
// Icosahedron subdivided `level` times with vertices projected to the sphere.
TriangleMesh icosphere(int level, double radius = 1.0);
// Axis-aligned cube [-h, h]^3 with every side split into n x n quads.
TriangleMesh cube(int n = 1, double half_size = 0.5);
// Torus around z: major radius R, minor radius r, nu x nv quads.
TriangleMesh torus(double major, double minor, int nu, int nv);

// A ground-truth mesh with a baked texture.
struct TexturedMesh {
  TriangleMesh mesh;
  UVAtlas atlas;
  Image texture;  // rows follow atlas rows

  // Bilinear texture lookup in [0,1] at a uv.
  Vec3 color_at(const Vec2& uv) const;
};

// Builds an atlas and paints every valid pixel with color(face, position).
TexturedMesh paint_mesh(const TriangleMesh& mesh, int resolution,
                        const std::function<Vec3(int face, const Vec3& position)>& color);

// Unit-edge cube whose six sides carry distinct flat colors (see cube_face_colors).
TexturedMesh textured_cube(int n = 4, int resolution = 256);
const std::array<Vec3, 6>& cube_face_colors();  // +x, -x, +y, -y, +z, -z
// Index into cube_face_colors for an outward normal.
int cube_side(const Vec3& normal);

// Unit-diameter sphere with a smooth latitude/longitude color pattern.
TexturedMesh textured_sphere(int level = 4, int resolution = 256);

}  // namespace hsp
