#include "fixtures.hpp"
#include "oracles.hpp"

#include "hsp/losses.hpp"
#include "hsp/metrics.hpp"
#include "hsp/prior3d.hpp"
#include "hsp/sampling.hpp"
#include "hsp/topology.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace hsp;
using namespace hsp::test;

TEST(MeshConv, InvariantUnderNeighbourSwaps) {
  const TriangleMesh m = icosphere(1);
  const EdgeTopology topo = build_edge_topology(m);
  const EdgeFeatures x = EdgeFeatures::Random(topo.num_edges(), 4);
  const Eigen::MatrixXd k = Eigen::MatrixXd::Random(5, 20);
  const Eigen::VectorXd b = Eigen::VectorXd::Random(5);
  const EdgeFeatures ref = mesh_conv(x, topo, k, &b);
  for (auto swap : {std::array<int, 4>{2, 1, 0, 3}, {0, 3, 2, 1}, {2, 3, 0, 1}}) {
    EdgeTopology t = topo;
    for (auto& n : t.neighbors) n = {n[swap[0]], n[swap[1]], n[swap[2]], n[swap[3]]};
    EXPECT_TRUE(mesh_conv(x, t, k, &b) == ref);
  }
}

TEST(MeshConv, EquivariantUnderEdgeRelabeling) {
  const TriangleMesh m = icosphere(1);
  const EdgeTopology topo = build_edge_topology(m);
  std::vector<int> perm(topo.num_edges());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  const EdgeFeatures x = EdgeFeatures::Random(topo.num_edges(), 3);
  const Eigen::MatrixXd k = Eigen::MatrixXd::Random(4, 15);
  const EdgeFeatures out = mesh_conv(x, topo, k);
  const EdgeFeatures out_perm = mesh_conv(permuted_rows(x, perm), relabeled(topo, perm), k);
  EXPECT_TRUE(out_perm == permuted_rows(out, perm));
}

TEST(MeshConv, GatherLayoutAndBoundarySelfSubstitution) {
  TriangleMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.faces = {{0, 1, 2}};
  const EdgeTopology topo = build_edge_topology(tri);
  EdgeFeatures x(3, 1);
  x << 1.0, 2.0, 4.0;
  const Eigen::MatrixXd g = gather_mesh_conv_inputs(x, topo);
  for (int e = 0; e < 3; ++e) {
    const double a = x(topo.neighbors[e][0], 0), b = x(topo.neighbors[e][1], 0), self = x(e, 0);
    EXPECT_EQ(g(e, kernel_column(0, 0)), self);
    EXPECT_EQ(g(e, kernel_column(0, 1)), std::abs(a - self));
    EXPECT_EQ(g(e, kernel_column(0, 2)), a + self);
    EXPECT_EQ(g(e, kernel_column(0, 3)), std::abs(b - self));
    EXPECT_EQ(g(e, kernel_column(0, 4)), b + self);
  }
  EXPECT_THROW(mesh_conv(x, topo, Eigen::MatrixXd::Zero(2, 7)), ParameterError);
}

TEST(MeshPool, ReachesTargetAndKeepsClosedManifold) {
  const TriangleMesh m = icosphere(2);
  const EdgeTopology topo = build_edge_topology(m);
  const EdgeFeatures x = EdgeFeatures::Random(topo.num_edges(), 2);
  const PoolResult r = mesh_pool(x, topo, 0.8);
  EXPECT_LE(r.record.coarse_edges, static_cast<int>(std::ceil(0.8 * topo.num_edges())));
  EXPECT_EQ(r.topology.num_edges(), r.record.coarse_edges);
  EXPECT_EQ(std::accumulate(r.record.group_size.begin(), r.record.group_size.end(), 0), topo.num_edges());
  for (int e = 0; e < r.topology.num_edges(); ++e) EXPECT_FALSE(r.topology.is_boundary(e));
  // V - E + F = 2 on the coarse surface.
  EXPECT_EQ(r.topology.num_vertices - r.topology.num_edges() + static_cast<int>(r.topology.faces.size()), 2);
  // Coarse features are group means.
  EdgeFeatures sum = EdgeFeatures::Zero(r.record.coarse_edges, 2);
  for (int e = 0; e < topo.num_edges(); ++e) sum.row(r.record.parent[e]) += x.row(e);
  for (int c = 0; c < r.record.coarse_edges; ++c) {
    EXPECT_NEAR((sum.row(c) / r.record.group_size[c] - r.features.row(c)).norm(), 0.0, 1e-12);
  }
  EXPECT_TRUE(mesh_unpool(r.features, r.record).row(5) == r.features.row(r.record.parent[5]));
}

TEST(VertexDisplacements, AverageOfIncidentVotes) {
  const TriangleMesh m = icosphere(1);
  const EdgeTopology topo = build_edge_topology(m);
  EdgeFeatures delta(topo.num_edges(), 6);
  for (int e = 0; e < topo.num_edges(); ++e) delta.row(e) << 1, 2, 3, 1, 2, 3;
  for (const Vec3& d : vertex_displacements(topo, delta)) EXPECT_NEAR((d - Vec3(1, 2, 3)).norm(), 0.0, 1e-12);
  // One edge voting alone: its endpoints move by vote / valence.
  delta.setZero();
  delta.row(0) << 6, 0, 0, 0, 6, 0;
  const auto d = vertex_displacements(topo, delta);
  const int a = topo.edges[0][0], b = topo.edges[0][1];
  EXPECT_NEAR(d[a].x(), 6.0 / topo.one_ring[a].size(), 1e-12);
  EXPECT_NEAR(d[b].y(), 6.0 / topo.one_ring[b].size(), 1e-12);
}

TEST(InitEdgeNoise, ShapeAndDeterminism) {
  const EdgeTopology topo = build_edge_topology(icosphere(1));
  const EdgeFeatures a = init_edge_noise(topo, 9), b = init_edge_noise(topo, 9), c = init_edge_noise(topo, 10);
  EXPECT_EQ(a.rows(), topo.num_edges());
  EXPECT_EQ(a.cols(), 6);
  EXPECT_TRUE(a == b);
  EXPECT_FALSE(a == c);
}

namespace {

Prior3DConfig small_config(int steps) {
  Prior3DConfig cfg;
  cfg.blocks = {{6, 8}, {8, 16}, {16, 16}, {16, 8}, {8, 6}};
  cfg.steps = steps;
  cfg.learning_rate = 1e-3;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST(Optimize3DPrior, ShrinkWrapsOntoLargerSphere) {
  const TriangleMesh start = icosphere(2, 0.7);
  const auto cloud = positions_of(sample_surface(icosphere(4, 1.0), 2000, 1));
  const Prior3DResult r = optimize_3d_prior(start, cloud, small_config(150));
  ASSERT_EQ(r.log.back().step, 150);
  EXPECT_LT(r.log.back().chamfer, 0.1 * r.log.front().chamfer);
  EXPECT_LT(chamfer_metric(positions_of(sample_surface(r.mesh, 2000, 2)), cloud),
            0.5 * chamfer_metric(positions_of(sample_surface(start, 2000, 2)), cloud));
  EXPECT_EQ(r.mesh.faces, start.faces);
}

TEST(Optimize3DPrior, DeterministicPerSeed) {
  const TriangleMesh start = icosphere(1, 0.8);
  const auto cloud = positions_of(sample_surface(icosphere(3, 1.0), 500, 1));
  const Prior3DResult a = optimize_3d_prior(start, cloud, small_config(20));
  const Prior3DResult b = optimize_3d_prior(start, cloud, small_config(20));
  EXPECT_EQ(a.mesh.vertices, b.mesh.vertices);
  EXPECT_EQ(format_loss_log(a.log), format_loss_log(b.log));
}

TEST(Optimize3DPrior, RejectsOpenMeshAndEmptyCloud) {
  TriangleMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.faces = {{0, 1, 2}};
  const std::vector<Vec3> cloud{{0, 0, 1}, {1, 1, 1}, {0, 1, 1}, {1, 0, 1}};
  EXPECT_THROW(optimize_3d_prior(tri, cloud, small_config(2)), Error);
  EXPECT_THROW(optimize_3d_prior(icosphere(1), std::vector<Vec3>{}, small_config(2)), Error);
}
