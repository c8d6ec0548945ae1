#include "fixtures.hpp"

#include "hsp/config.hpp"
#include "hsp/mesh_io.hpp"
#include "hsp/metrics.hpp"
#include "hsp/pipeline.hpp"
#include "hsp/projection.hpp"
#include "hsp/seed.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hsp;
namespace fs = std::filesystem;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig c = desk_preset();
  c.iterations = 1;
  c.initial_vertices = 150;
  c.refinement_vertex_schedule = {250};
  c.atlas_resolution = 64;
  c.prior3d.blocks = {{6, 8}, {8, 8}, {8, 8}, {8, 8}, {8, 6}};
  c.prior3d.pool_after = {1, 2};
  c.prior3d.steps = 15;
  for (Prior2DConfig* p : {&c.prior2d_xyz, &c.prior2d_rgb}) {
    p->resolution = 64;
    p->steps = 10;
    p->levels = 2;
    p->down_channels = 8;
    p->up_channels = 8;
    p->input_channels = 8;
  }
  c.seed = 3;
  return c;
}

PointCloud tiny_cloud() { return synthesize_input(textured_sphere(3, 128), 800, 0.0, 5); }

EvaluationConfig quick_eval() {
  EvaluationConfig e;
  e.samples = 20000;
  e.emd_points = 128;
  return e;
}

}  // namespace

TEST(Evaluate, IdenticalMeshes) {
  const TriangleMesh m = icosphere(3, 2.0);
  const MetricReport r = evaluate(m, m, quick_eval());
  EXPECT_DOUBLE_EQ(r.f_score, 100.0);
  EXPECT_DOUBLE_EQ(r.chamfer, 0.0);
  EXPECT_NEAR(r.emd, 0.0, 1e-12);
  EXPECT_NEAR(r.normal_consistency, 1.0, 1e-12);
}

TEST(Evaluate, ShiftBeyondThresholdGivesZeroF) {
  const TriangleMesh gt = cube(2, 0.5);
  TriangleMesh shifted = gt;
  for (Vec3& v : shifted.vertices) v += Vec3(0.2, 0.2, 0.2);
  const MetricReport r = evaluate(shifted, gt, quick_eval());
  EXPECT_LT(r.f_score, 30.0);
  // A far-away copy has no point within the threshold at all.
  for (Vec3& v : shifted.vertices) v += Vec3(1.0, 0, 0);
  EXPECT_DOUBLE_EQ(evaluate(shifted, gt, quick_eval()).f_score, 0.0);
}

TEST(Evaluate, RecomposesFromStandaloneMetrics) {
  const TriangleMesh gt = icosphere(3, 3.0);
  TriangleMesh pred = gt;
  for (Vec3& v : pred.vertices) v.x() += 0.01;
  const EvaluationConfig ec = quick_eval();
  const MetricReport r = evaluate(pred, gt, ec);
  const Normalization f1 = evaluation_frame(gt, 1.0);
  const auto ps = sample_with_normals(transformed(pred, f1), ec.samples, ec.seed);
  const auto gs = sample_with_normals(transformed(gt, f1), ec.samples, ec.seed);
  std::vector<Vec3> pp, gp;
  for (const auto& o : ps) pp.push_back(o.position);
  for (const auto& o : gs) gp.push_back(o.position);
  EXPECT_DOUBLE_EQ(r.chamfer, chamfer_metric(pp, gp));
  EXPECT_DOUBLE_EQ(r.normal_consistency, normal_consistency(ps, gs));
  EXPECT_DOUBLE_EQ(r.emd, emd_metric(subsample(pp, ec.emd_points, mix_seed(ec.seed, 1)),
                                     subsample(gp, ec.emd_points, mix_seed(ec.seed, 1))));
  EXPECT_GT(r.f_score, 0.0);
  EXPECT_LT(r.f_score, 100.0);
}

TEST(SynthesizeInput, CleanSamplesOnSurface) {
  const TriangleMesh m = torus(1.0, 0.3, 32, 16);
  const PointCloud c = synthesize_input(m, 25000, 0.0, 1);
  ASSERT_EQ(c.size(), 25000u);
  const FaceBvh bvh(m);
  for (std::size_t i = 0; i < c.size(); i += 97) EXPECT_LT((bvh.closest(c.positions[i]).position - c.positions[i]).norm(), 1e-9);
  EXPECT_THROW(synthesize_input(m, 100, 0.0, 1, true), ParameterError);
  EXPECT_THROW(synthesize_input(m, 3, 0.0, 1), ParameterError);
}

TEST(SynthesizeInput, NoiseMatchesHalfNormalExpectation) {
  const TriangleMesh m = icosphere(5, 1.0);
  const PointCloud c = synthesize_input(m, 5000, 0.02, 2);
  const double sigma = 0.02 * 2.0;  // extent is the diameter
  const double expected = sigma * std::sqrt(2.0 / 3.14159265358979);
  const FaceBvh bvh(m);
  double mean = 0.0;
  for (const Vec3& p : c.positions) mean += (bvh.closest(p).position - p).norm();
  mean /= c.size();
  EXPECT_GE(mean, 0.5 * expected);
  EXPECT_LE(mean, 2.5 * expected);
}

TEST(SynthesizeInput, TexturedColorsInRange) {
  const PointCloud c = synthesize_input(textured_cube(2, 64), 500, 0.0, 4);
  ASSERT_TRUE(c.has_colors());
  for (const Vec3& col : *c.colors) {
    EXPECT_GE(col.minCoeff(), 0.0);
    EXPECT_LE(col.maxCoeff(), 1.0);
  }
}

TEST(MeshQuality, SelfIntersectionsAndEdgeSpread) {
  EXPECT_EQ(count_self_intersections(icosphere(3)), 0);
  TriangleMesh two = icosphere(1, 1.0);
  const TriangleMesh other = icosphere(1, 1.0);
  for (const Face& f : other.faces) two.faces.push_back({f[0] + 42, f[1] + 42, f[2] + 42});
  for (const Vec3& v : other.vertices) two.vertices.push_back(v + Vec3(0.5, 0, 0));
  EXPECT_GT(count_self_intersections(two), 0);
  EXPECT_NEAR(edge_length_stddev(tetrahedron()), 0.0, 1e-12);
  EXPECT_GT(edge_length_stddev(torus(1.0, 0.2, 16, 8)), 0.0);
}

TEST(Presets, DeskDividesStepsByFourAndValidates) {
  const PipelineConfig full = full_preset(), desk = desk_preset();
  EXPECT_EQ(desk.prior3d.steps * 4, full.prior3d.steps);
  EXPECT_EQ(desk.prior2d_xyz.steps * 4, full.prior2d_xyz.steps);
  EXPECT_EQ(desk.prior2d_rgb.steps * 4, full.prior2d_rgb.steps);
  EXPECT_EQ(full.refinement_vertex_schedule, (std::vector<int>{5000, 10000, 20000}));
  EXPECT_EQ(full.initial_vertices, 2000);
  EXPECT_NO_THROW(validate(full));
  EXPECT_NO_THROW(validate(desk));
  PipelineConfig bad = desk;
  bad.refinement_vertex_schedule = {10, 5, 3};
  EXPECT_THROW(validate(bad), ParameterError);
  EXPECT_THROW(preset_by_name("huge"), ParameterError);
}

TEST(Reconstruct, TinyRunProducesCheckpointedTexturedMesh) {
  PipelineConfig cfg = tiny_config();
  cfg.checkpoint_dir = hsp::test::temp_dir("recon_tiny");
  PointCloud cloud = tiny_cloud();
  for (Vec3& p : cloud.positions) p += Vec3(10.0, -5.0, 3.0);
  const ReconstructionResult r = reconstruct(cloud, cfg);
  ASSERT_EQ(r.stages.size(), 3u);
  EXPECT_EQ(r.stages[0].name, "init3d");
  EXPECT_EQ(r.stages[1].name, "iter1");
  EXPECT_EQ(r.stages[2].name, "texture");
  EXPECT_LE(r.stages[0].faces, r.stages[1].faces);
  EXPECT_EQ(r.stages[1].faces, r.stages[2].faces);
  EXPECT_TRUE(is_watertight(r.mesh));
  EXPECT_EQ(r.texture.width, 64);
  EXPECT_TRUE(atlas_violations(r.mesh, r.atlas).empty());
  for (const char* f : {"manifest.json", "stage_0/mesh.obj", "stage_0/loss.log", "stage_1/atlas.obj",
                        "stage_1/sparse_xyz.png", "stage_1/dense_xyz.npy", "stage_2/sparse_rgb.png",
                        "stage_2/dense_rgb.npy", "stage_2/texture.png"}) {
    EXPECT_TRUE(fs::exists(fs::path(cfg.checkpoint_dir) / f)) << f;
  }
  std::vector<std::size_t> shape;
  EXPECT_EQ(read_npy(cfg.checkpoint_dir + "/stage_1/dense_xyz.npy", &shape).size(), 64u * 64u * 3u);
  EXPECT_EQ(shape, (std::vector<std::size_t>{64, 64, 3}));
  const Json manifest = Json::parse(read_text(cfg.checkpoint_dir + "/manifest.json"));
  EXPECT_EQ(manifest["config_hash"], config_hash(cfg));
  // The mesh is returned in the (offset) input frame.
  const BoundingBox in = bounding_box(cloud.positions), out = bounding_box(r.mesh.vertices);
  EXPECT_LT((0.5 * (in.min + in.max) - 0.5 * (out.min + out.max)).norm(), 0.3);
  EXPECT_NEAR(out.extent().maxCoeff(), in.extent().maxCoeff(), 0.5);
}

TEST(Reconstruct, ResumeMatchesUninterruptedRun) {
  const PointCloud cloud = tiny_cloud();
  PipelineConfig a = tiny_config();
  a.checkpoint_dir = hsp::test::temp_dir("recon_full");
  const ReconstructionResult full = reconstruct(cloud, a);

  PipelineConfig b = tiny_config();
  b.checkpoint_dir = hsp::test::temp_dir("recon_resume");
  ReconstructOptions stop;
  stop.stop_after_stages = 2;
  const ReconstructionResult partial = reconstruct(cloud, b, stop);
  EXPECT_EQ(partial.stages.size(), 2u);
  ReconstructOptions resume;
  resume.resume = true;
  const ReconstructionResult resumed = reconstruct(cloud, b, resume);
  EXPECT_EQ(resumed.mesh.vertices, full.mesh.vertices);
  EXPECT_EQ(resumed.mesh.faces, full.mesh.faces);
  EXPECT_EQ(resumed.texture.rgb, full.texture.rgb);
  ASSERT_EQ(resumed.stages.size(), full.stages.size());

  // Resuming under a different seed is refused.
  PipelineConfig c = b;
  c.seed = 99;
  EXPECT_THROW(reconstruct(cloud, c, resume), ParameterError);
}

TEST(Reconstruct, StageErrorsNameStageAndCheckpoint) {
  PointCloud flat;
  for (int i = 0; i < 50; ++i) flat.positions.emplace_back(i % 7, i / 7, 0.0);
  PipelineConfig cfg = tiny_config();
  cfg.texture = false;
  cfg.checkpoint_dir = hsp::test::temp_dir("recon_err");
  try {
    reconstruct(flat, cfg);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "init3d");
    EXPECT_TRUE(e.checkpoint().empty());
  }
  EXPECT_THROW(reconstruct(synthesize_input(icosphere(2), 100, 0.0, 1), tiny_config()), ParameterError);
}

TEST(Reconstruct, WriteTexturedObj) {
  PipelineConfig cfg = tiny_config();
  const ReconstructionResult r = reconstruct(tiny_cloud(), cfg);
  const std::string dir = hsp::test::temp_dir("recon_out");
  write_textured_obj(dir, r);
  for (const char* f : {"mesh.obj", "material.mtl", "texture.png"}) EXPECT_TRUE(fs::exists(fs::path(dir) / f));
  const ObjData obj = read_obj(dir + "/mesh.obj");
  EXPECT_EQ(obj.mesh.faces, r.mesh.faces);
  EXPECT_EQ(obj.face_texcoords.size(), r.mesh.faces.size());
  EXPECT_NE(read_text(dir + "/mesh.obj").find("mtllib material.mtl"), std::string::npos);
}
