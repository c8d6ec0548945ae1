#include "fixtures.hpp"
#include "oracles.hpp"

#include "hsp/atlas.hpp"
#include "hsp/pipeline.hpp"
#include "hsp/projection.hpp"
#include "hsp/sampling.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <map>

using namespace hsp;
using namespace hsp::test;

namespace {

struct Fixture {
  const char* name;
  TriangleMesh mesh;
};

}  // namespace

TEST(Atlas, SphereCubeTorusPassIntegrityChecks) {
  for (const Fixture& fx : {Fixture{"sphere", icosphere(4, 0.5)}, Fixture{"cube", cube(6, 0.5)},
                            Fixture{"torus", torus(0.35, 0.15, 48, 24)}}) {
    AtlasStats stats;
    const UVAtlas a = generate_atlas(fx.mesh, 512, {}, &stats);
    EXPECT_TRUE(atlas_violations(fx.mesh, a, 2).empty()) << fx.name;
    const auto mult = rasterization_multiplicity(a);
    EXPECT_LE(*std::max_element(mult.begin(), mult.end()), 1) << fx.name;
    EXPECT_LE(max_interior_cover(a), 1) << fx.name;
    EXPECT_LT(max_seam_error(fx.mesh, a), 1e-6) << fx.name;
    EXPECT_GE(min_chart_gap(a), 2.0) << fx.name;
    for (const auto& c : a.corner_uv) {
      for (const Vec2& uv : c) {
        EXPECT_GE(uv.minCoeff(), 0.0);
        EXPECT_LE(uv.maxCoeff(), 1.0);
      }
    }
    EXPECT_EQ(stats.charts, a.num_charts);
    EXPECT_GT(a.valid_pixel_count(), 0);
  }
}

TEST(Atlas, SplatRetentionOnSphere) {
  const TriangleMesh m = icosphere(4, 0.5);
  const UVAtlas a = generate_atlas(m, 512);
  const PointCloud cloud = synthesize_input(m, 25000, 0.0, 3);
  const SparseUVSamples s = splat_points_to_uv(m, a, cloud, ChannelKind::XYZ);
  EXPECT_GE(static_cast<double>(s.size()) / cloud.size(), 0.95);
  EXPECT_EQ(static_cast<int>(s.size()) + s.dropped, 25000);
}

TEST(Atlas, SiteConventionRoundTrip) {
  const Vec2 uv(0.25, 0.75);
  const Vec2 s = uv_to_site(uv, 64);
  EXPECT_DOUBLE_EQ(s.x(), 0.75 * 64 - 0.5);  // row from v
  EXPECT_DOUBLE_EQ(s.y(), 0.25 * 64 - 0.5);  // column from u
  EXPECT_NEAR((site_to_uv(s, 64) - uv).norm(), 0.0, 1e-15);
}

TEST(Atlas, ObjExportImportRoundTrip) {
  const TriangleMesh m = torus(0.35, 0.15, 24, 12);
  const UVAtlas a = generate_atlas(m, 256);
  const std::string dir = hsp::test::temp_dir("atlas_io");
  export_atlas_obj(dir + "/atlas.obj", m, a);
  TriangleMesh back;
  const UVAtlas b = import_atlas(dir + "/atlas.obj", 256, &back);
  EXPECT_EQ(back.vertices, m.vertices);
  EXPECT_EQ(back.faces, m.faces);
  EXPECT_EQ(b.corner_uv, a.corner_uv);
  EXPECT_EQ(b.chart_id, a.chart_id);
  EXPECT_EQ(b.pixel_chart, a.pixel_chart);
}

TEST(Atlas, RejectsOverlappingCornerUvs) {
  const TriangleMesh m = icosphere(1);
  std::vector<std::array<Vec2, 3>> uv(m.num_faces(), {Vec2(0.1, 0.1), Vec2(0.9, 0.1), Vec2(0.1, 0.9)});
  EXPECT_THROW(atlas_from_corner_uvs(m, uv, 64), AtlasError);
}

TEST(Atlas, VertexAttributeRoundTrip) {
  const TriangleMesh m = icosphere(3, 0.5);
  const UVAtlas a = generate_atlas(m, 512);
  const DenseUVMap map = rasterize_vertex_attribute(m, a, m.vertices, ChannelKind::XYZ);
  const VertexUpdate u = update_vertices_from_map(m, a, map);
  EXPECT_EQ(u.fallback_vertices, 0);
  double worst = 0.0;
  for (int v = 0; v < m.num_vertices(); ++v) worst = std::max(worst, (u.mesh.vertices[v] - m.vertices[v]).norm());
  EXPECT_LT(worst, 1e-3);
}

TEST(Atlas, BakeConstantMap) {
  const TriangleMesh m = cube(2, 0.5);
  const UVAtlas a = generate_atlas(m, 64);
  DenseUVMap map;
  map.kind = ChannelKind::RGB;
  map.map = FeatureMap(64, 64, 3);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) map.set(r, c, Vec3(1.0, 0.5, 0.0));
  }
  const Image img = bake_texture(a, map);
  ASSERT_EQ(img.width, 64);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      const auto p = img.pixel(r, c);
      EXPECT_EQ(p[0], 255);
      EXPECT_EQ(p[1], 128);
      EXPECT_EQ(p[2], 0);
    }
  }
}

TEST(Atlas, RgbSplatNeedsColors) {
  const TriangleMesh m = icosphere(2, 0.5);
  const UVAtlas a = generate_atlas(m, 64);
  EXPECT_THROW(splat_points_to_uv(m, a, synthesize_input(m, 100, 0.0, 1), ChannelKind::RGB), ParameterError);
}

TEST(TexturedShapes, CubeFacesCarryTheirColors) {
  const TexturedMesh t = textured_cube(4, 256);
  const FaceBvh bvh(t.mesh);
  const std::array<Vec3, 6> centers{Vec3(0.5, 0.1, 0.2), Vec3(-0.5, -0.1, 0.2), Vec3(0.1, 0.5, -0.2),
                                    Vec3(0.1, -0.5, 0.2), Vec3(-0.2, 0.1, 0.5), Vec3(0.2, 0.1, -0.5)};
  for (int side = 0; side < 6; ++side) {
    const SurfacePoint sp = bvh.closest(centers[side]);
    const auto& c = t.atlas.corner_uv[sp.face_id];
    const Vec2 uv = sp.barycentric[0] * c[0] + sp.barycentric[1] * c[1] + sp.barycentric[2] * c[2];
    EXPECT_LT((t.color_at(uv) - cube_face_colors()[side]).norm(), 0.02) << side;
  }
}
