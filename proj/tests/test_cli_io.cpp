#include "fixtures.hpp"

#include "cli.hpp"
#include "hsp/config.hpp"
#include "hsp/image.hpp"
#include "hsp/mesh_io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace hsp;
using hsp::test::read_file;
using hsp::test::temp_dir;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int status;
  std::string out, err;
};

CliRun run(std::vector<std::string> args, std::vector<std::string> env = {}) {
  args.insert(args.begin(), "hsp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);
  std::ostringstream out, err;
  const int status = run_cli(static_cast<int>(argv.size()), argv.data(), envp.data(), out, err);
  return {status, out.str(), err.str()};
}

void write(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

}  // namespace

TEST(PlyIo, AsciiWithUcharColors) {
  const std::string dir = temp_dir("ply_ascii");
  write(dir + "/a.ply",
        "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n0 1 2 255 0 51\n3 4 5 0 255 102\n");
  const PointCloud c = read_ply_cloud(dir + "/a.ply");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.positions[1], Vec3(3, 4, 5));
  ASSERT_TRUE(c.has_colors());
  EXPECT_NEAR((*c.colors)[0].z(), 0.2, 1e-12);
}

TEST(PlyIo, FloatColorsPassThroughAndFacesLoad) {
  const std::string dir = temp_dir("ply_float");
  write(dir + "/m.ply",
        "ply\nformat ascii 1.0\nelement vertex 4\nproperty double x\nproperty double y\nproperty double z\n"
        "property float red\nproperty float green\nproperty float blue\nelement face 1\n"
        "property list uchar int vertex_indices\nend_header\n0 0 0 0.5 0.25 1\n1 0 0 0 0 0\n1 1 0 0 0 0\n0 1 0 0 0 0\n"
        "4 0 1 2 3\n");
  const PointCloud c = read_ply_cloud(dir + "/m.ply");
  EXPECT_DOUBLE_EQ((*c.colors)[0].y(), 0.25);
  const TriangleMesh m = read_ply_mesh(dir + "/m.ply");
  EXPECT_EQ(m.num_faces(), 2);
}

TEST(PlyIo, BinaryRoundTrip) {
  const std::string dir = temp_dir("ply_bin");
  std::mt19937_64 rng(1);
  PointCloud c;
  c.positions = hsp::test::random_points(300, rng, 5.0);
  c.colors.emplace();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 300; ++i) c.colors->emplace_back(u(rng), u(rng), u(rng));
  write_ply_cloud(dir + "/c.ply", c);
  const PointCloud back = read_ply_cloud(dir + "/c.ply");
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_LT((back.positions[i] - c.positions[i]).norm(), 1e-6);
    EXPECT_LE(((*back.colors)[i] - (*c.colors)[i]).cwiseAbs().maxCoeff(), 1.0 / 255 + 1e-12);
  }
  EXPECT_THROW(read_ply_cloud(dir + "/missing.ply"), IoError);
}

TEST(ObjIo, RoundTripAndNegativeIndices) {
  const std::string dir = temp_dir("obj");
  const TriangleMesh m = torus(1.0, 0.25, 12, 6);
  write_obj(dir + "/t.obj", m);
  const ObjData back = read_obj(dir + "/t.obj");
  EXPECT_EQ(back.mesh.vertices, m.vertices);
  EXPECT_EQ(back.mesh.faces, m.faces);
  write(dir + "/n.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf -3/-3 -2/-2 -1/-1\n");
  const ObjData n = read_obj(dir + "/n.obj");
  EXPECT_EQ(n.mesh.faces[0], (Face{0, 1, 2}));
  EXPECT_EQ(n.face_texcoords[0], (std::array<int, 3>{0, 1, 2}));
  try {
    read_mesh(dir + "/nope.obj");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nope.obj"), std::string::npos);
  }
}

TEST(NpyIo, RoundTrip) {
  const std::string dir = temp_dir("npy");
  const std::vector<double> data{1.5, -2.0, 3.25, 4.0, 5.0, 6.0};
  write_npy(dir + "/a.npy", {2, 3}, data);
  std::vector<std::size_t> shape;
  EXPECT_EQ(read_npy(dir + "/a.npy", &shape), data);
  EXPECT_EQ(shape, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(read_file(dir + "/a.npy").substr(1, 5), "NUMPY");
}

TEST(PngIo, RoundTripAndFlip) {
  const std::string dir = temp_dir("png");
  Image img(5, 3);
  for (std::size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = static_cast<std::uint8_t>(i * 7);
  write_png(dir + "/a.png", img);
  const Image back = read_png(dir + "/a.png");
  EXPECT_EQ(back.rgb, img.rgb);
  const Image f = flipped_vertically(img);
  EXPECT_EQ(f.pixel(0, 1)[2], img.pixel(2, 1)[2]);
}

TEST(Config, UnknownKeysRejectedWithPath) {
  try {
    run_config_from_json(Json::parse(R"({"pipeline": {"prior3d": {"stepz": 3}}})"));
    FAIL();
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("pipeline.prior3d.stepz"), std::string::npos);
  }
  EXPECT_THROW(run_config_from_json(Json::parse(R"({"bogus": 1})")), ParameterError);
  EXPECT_THROW(run_config_from_json(Json::parse(R"({"pipeline": {"iterations": "two"}})")), ParameterError);
}

TEST(Config, OverlayPresetAndRoundTrip) {
  const RunConfig rc = run_config_from_json(
      Json::parse(R"({"preset": "full", "pipeline": {"iterations": 2, "prior2d_rgb": {"steps": 7}}})"));
  EXPECT_EQ(rc.pipeline.iterations, 2);
  EXPECT_EQ(rc.pipeline.prior2d_rgb.steps, 7);
  EXPECT_EQ(rc.pipeline.prior3d.steps, full_preset().prior3d.steps);
  const RunConfig again = run_config_from_json(to_json(rc));
  EXPECT_EQ(to_json(again), to_json(rc));
  EXPECT_EQ(config_hash(again.pipeline), config_hash(rc.pipeline));
  PipelineConfig other = rc.pipeline;
  other.prior3d.learning_rate *= 2;
  EXPECT_NE(config_hash(other), config_hash(rc.pipeline));
}

TEST(Config, EnvironmentOverrides) {
  RunConfig rc;
  std::string a = "HSP_PIPELINE__ITERATIONS=2", b = "HSP_EVALUATION__SAMPLES=50000", c = "PATH=/bin",
              d = "HSP_PIPELINE__PRIOR3D__LEARNING_RATE=0.005";
  std::vector<char*> env{a.data(), b.data(), c.data(), d.data(), nullptr};
  const auto applied = apply_env_overrides(rc, env.data());
  EXPECT_EQ(applied.size(), 3u);
  EXPECT_EQ(rc.pipeline.iterations, 2);
  EXPECT_EQ(rc.evaluation.samples, 50000);
  EXPECT_DOUBLE_EQ(rc.pipeline.prior3d.learning_rate, 0.005);
  std::string e = "HSP_PIPELINE__NOPE=1";
  std::vector<char*> bad{e.data(), nullptr};
  EXPECT_THROW(apply_env_overrides(rc, bad.data()), ParameterError);
}

TEST(Config, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Cli, SynthWritesPlyAndProvenanceDeterministically) {
  const std::string dir = temp_dir("cli_synth");
  const CliRun r1 = run({"synth", "--shape", "sphere", "--points", "2500", "--noise", "0.02", "--seed", "4", "--out",
                         dir + "/a.ply"});
  ASSERT_EQ(r1.status, 0) << r1.err;
  run({"synth", "--shape", "sphere", "--points", "2500", "--noise", "0.02", "--seed", "4", "--out", dir + "/b.ply"});
  EXPECT_EQ(read_file(dir + "/a.ply"), read_file(dir + "/b.ply"));
  const PointCloud c = read_ply_cloud(dir + "/a.ply");
  EXPECT_EQ(c.size(), 2500u);
  EXPECT_TRUE(c.has_colors());
  const Json rec = Json::parse(read_file(dir + "/a.ply.json"));
  EXPECT_EQ(rec["n_points"], 2500);
  EXPECT_EQ(rec["noise"], 0.02);
  EXPECT_EQ(rec["seed"], 4);
  EXPECT_EQ(run({"synth", "--shape", "sphere", "--points", "100", "--out", dir + "/toy.ply"}).status, 0);
  EXPECT_EQ(read_ply_cloud(dir + "/toy.ply").size(), 100u);
}

TEST(Cli, ReconstructMissingInputNamesPath) {
  const std::string dir = temp_dir("cli_missing");
  const CliRun r = run({"reconstruct", "--input", dir + "/absent.ply", "--out", dir + "/out"});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("absent.ply"), std::string::npos);
  EXPECT_NE(r.err.find("input"), std::string::npos);
}

TEST(Cli, ReconstructRejectsInvalidConfig) {
  const std::string dir = temp_dir("cli_badcfg");
  write(dir + "/cfg.json", R"({"pipeline": {"iterationz": 1}})");
  const CliRun r = run({"reconstruct", "--config", dir + "/cfg.json", "--input", "x.ply", "--out", dir});
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.err.find("iterationz"), std::string::npos);
}

TEST(Cli, EvaluateRowsMeanAndSamplesEcho) {
  const std::string dir = temp_dir("cli_eval");
  write_obj(dir + "/gt.obj", icosphere(3, 1.0));
  write_obj(dir + "/p1.obj", icosphere(3, 1.0));
  write_obj(dir + "/p2.obj", icosphere(2, 1.05));
  const CliRun r = run({"evaluate", "--pred", dir + "/p1.obj", "--pred", dir + "/p2.obj", "--gt", dir + "/gt.obj",
                        "--name", "same", "--name", "coarse", "--samples", "5000", "--csv", dir + "/t.csv",
                        "--set", "evaluation.emd_points=64"});
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("samples=5000"), std::string::npos);
  EXPECT_NE(r.out.find("mean"), std::string::npos);
  std::istringstream csv(read_file(dir + "/t.csv"));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::getline(csv, line);
  EXPECT_NE(line.find("samples=5000"), std::string::npos);
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::vector<double> v;
    std::istringstream ls(line.substr(line.find(',') + 1));
    for (std::string cell; std::getline(ls, cell, ',');) v.push_back(std::stod(cell));
    rows.push_back(v);
  }
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows[0][0], 100.0);
  EXPECT_DOUBLE_EQ(rows[0][1], 0.0);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(rows[2][k], 0.5 * (rows[0][k] + rows[1][k]), 1e-8 * (1 + std::abs(rows[2][k])));
}

TEST(Cli, ConfigCommandShowsResolvedValues) {
  const CliRun r = run({"config", "--preset", "full"}, {"HSP_PIPELINE__ITERATIONS=2"});
  ASSERT_EQ(r.status, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["preset"], "full");
  EXPECT_EQ(j["pipeline"]["iterations"], 2);
  EXPECT_EQ(j["pipeline"]["prior3d"]["steps"], 2000);
}

TEST(Cli, UsageErrorsAreNonzero) {
  EXPECT_NE(run({}).status, 0);
  EXPECT_NE(run({"synth"}).status, 0);
  EXPECT_NE(run({"reconstruct", "--preset", "medium"}).status, 0);
}
