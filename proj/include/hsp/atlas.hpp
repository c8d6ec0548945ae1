#pragma once

#include "hsp/geometry.hpp"
#include "hsp/image.hpp"
#include "hsp/projection.hpp"
#include "hsp/uvmaps.hpp"

#include <array>
#include <string>
#include <vector>

namespace hsp {

struct ChartUV {
  int chart;
  Vec2 uv;
};

// Pixel (row i, col j) is centred at uv ((j + 0.5) / res, (i + 0.5) / res);
// a uv point maps to the sub-pixel site (v * res - 0.5, u * res - 0.5).
struct UVAtlas {
  int resolution = 0;
  std::vector<std::array<Vec2, 3>> corner_uv;  // per face
  std::vector<int> chart_id;                   // per face
  int num_charts = 0;
  std::vector<std::vector<ChartUV>> vertex_uv;  // per vertex, one entry per adjacent chart
  // Per pixel (row-major): owning chart or -1, and the nearest face of that chart.
  std::vector<int> pixel_chart;
  std::vector<int> pixel_face;

  bool valid(int r, int c) const { return pixel_chart[static_cast<std::size_t>(r) * resolution + c] >= 0; }
  int chart_at(int r, int c) const { return pixel_chart[static_cast<std::size_t>(r) * resolution + c]; }
  std::vector<std::uint8_t> valid_mask() const;
  int valid_pixel_count() const;
};

Vec2 uv_to_site(const Vec2& uv, int resolution);
Vec2 site_to_uv(const Vec2& site, int resolution);

// True when the four bilinear pixels of the site are valid and all belong to `chart`.
bool site_is_valid(const UVAtlas& atlas, const Vec2& site, int chart);

struct AtlasOptions {
  double cone_degrees = 60.0;  // normal-cone half angle for chart growth
  int border_pixels = 2;       // free pixels inside each packed rectangle
  int gutter_pixels = 2;       // gap between packed rectangles
  double valid_radius = 1.5;   // pixel centres within this distance of a chart are valid
  double max_distortion = 10.0;
  int max_resegment_depth = 6;
  // Charts with fewer faces are merged into a neighbour when the union still flattens validly.
  int merge_below_faces = 16;
};

struct AtlasStats {
  int charts = 0;
  int resegmented_charts = 0;
  double max_distortion = 1.0;  // largest per-face singular-value ratio
  int distortion_outliers = 0;  // faces above AtlasOptions::max_distortion
  int merged_charts = 0;
};

// Charts by normal-cone region growth, least-squares conformal flattening,
// skyline packing. Requires a watertight mesh.
UVAtlas generate_atlas(const TriangleMesh& mesh, int resolution, const AtlasOptions& options = {},
                       AtlasStats* stats = nullptr);

// Per-face singular-value ratio of the 3D -> UV Jacobian (1 for a similarity).
std::vector<double> face_distortion(const TriangleMesh& mesh, const UVAtlas& atlas);

// Violations of the atlas invariants: UV range, chart consistency, continuity
// inside charts, injectivity (centre-sample multiplicity), rasterization
// coverage, gutter. Empty when valid.
std::vector<std::string> atlas_violations(const TriangleMesh& mesh, const UVAtlas& atlas, int min_gutter_pixels = 2);

// Number of triangles covering each pixel centre (top-left fill rule).
std::vector<int> rasterization_multiplicity(const UVAtlas& atlas);

// Builds an atlas from per-corner UVs (charts = components of faces sharing
// UV corners). Throws AtlasError listing the violations.
UVAtlas atlas_from_corner_uvs(const TriangleMesh& mesh, const std::vector<std::array<Vec2, 3>>& corner_uv,
                              int resolution, const AtlasOptions& options = {}, int min_gutter_pixels = 2);

// OBJ with v / vt / f v/vt records. `material` adds mtllib/usemtl lines.
void export_atlas_obj(const std::string& path, const TriangleMesh& mesh, const UVAtlas& atlas,
                      const std::string& mtl_file = "", const std::string& material = "");
UVAtlas import_atlas(const std::string& obj_path, int resolution, TriangleMesh* mesh_out = nullptr);

// Projects every cloud point onto the mesh and maps it to a UV site; points
// whose site fails the valid-site test are dropped and counted. Throws
// AtlasError when more than half are dropped.
SparseUVSamples splat_points_to_uv(const TriangleMesh& mesh, const UVAtlas& atlas, const PointCloud& cloud,
                                   ChannelKind kind, const FaceBvh* bvh = nullptr);

struct VertexUpdate {
  TriangleMesh mesh;
  int fallback_vertices = 0;
};

// New vertex = mean over its chart entries of the bilinear map value at the
// entry's uv; vertices with no valid entry keep their position.
VertexUpdate update_vertices_from_map(const TriangleMesh& mesh, const UVAtlas& atlas, const DenseUVMap& map);

// Writes the affine extension of per-vertex attributes into every valid pixel
// (nearest face of the pixel's chart); invalid pixels are zero.
DenseUVMap rasterize_vertex_attribute(const TriangleMesh& mesh, const UVAtlas& atlas,
                                      const std::vector<Vec3>& attribute, ChannelKind kind);

// Valid pixels: clamp to [0,1] and round to 8 bits; invalid pixels copy the
// nearest valid pixel (breadth-first dilation). Rows follow atlas rows.
Image bake_texture(const UVAtlas& atlas, const DenseUVMap& map);

// Debug view of a sparse map: every site as a 2x2 dot. XYZ values are
// rescaled by their bounding box.
Image sparse_map_image(const SparseUVSamples& samples);

// Debug view of a dense map, rescaled like sparse_map_image for XYZ.
Image dense_map_image(const DenseUVMap& map);

}  // namespace hsp
