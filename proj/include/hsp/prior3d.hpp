#pragma once

#include "hsp/adam.hpp"
#include "hsp/geometry.hpp"
#include "hsp/losses.hpp"
#include "hsp/topology.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hsp {

// E x C per-edge features, one row per edge.
using EdgeFeatures = Eigen::MatrixXd;

// Zero-mean Gaussian edge features of shape E x 6 (two 3D displacements per edge).
EdgeFeatures init_edge_noise(const EdgeTopology& topology, std::uint64_t seed, double stddev = 1.0);

// Column of the (C_in x 5) kernel slice for input channel i and slot s.
inline int kernel_column(int channel, int slot) { return channel * 5 + slot; }

// Gathers the symmetric 5-tuple (e, |a-c|, a+c, |b-d|, b+d) for every edge
// and channel into an E x (5 C) matrix. Missing neighbours use the edge itself.
Eigen::MatrixXd gather_mesh_conv_inputs(const EdgeFeatures& features, const EdgeTopology& topology);

// Edge convolution. `kernel` is C_out x (5 C_in), indexed by kernel_column.
// Throws ParameterError on shape mismatch.
EdgeFeatures mesh_conv(const EdgeFeatures& features, const EdgeTopology& topology, const Eigen::MatrixXd& kernel,
                       const Eigen::VectorXd* bias = nullptr);

struct MeshConvGradients {
  EdgeFeatures input;
  Eigen::MatrixXd kernel;
  Eigen::VectorXd bias;
};

MeshConvGradients mesh_conv_backward(const EdgeFeatures& features, const EdgeTopology& topology,
                                     const Eigen::MatrixXd& kernel, const EdgeFeatures& grad_output);

// Maps every edge of the finer topology to the coarse edge it was merged into.
struct CollapseRecord {
  std::vector<int> parent;      // fine edge -> coarse edge
  std::vector<int> group_size;  // coarse edge -> number of fine edges merged into it
  int fine_edges = 0;
  int coarse_edges = 0;
  int collapses = 0;
};

struct PoolResult {
  EdgeFeatures features;
  EdgeTopology topology;
  CollapseRecord record;
};

// Collapses edges in ascending feature-norm order until ceil(keep_fraction * E)
// edges remain, skipping collapses that would break manifoldness. Coarse
// features are the mean over merged fine edges.
PoolResult mesh_pool(const EdgeFeatures& features, const EdgeTopology& topology, double keep_fraction);

EdgeFeatures mesh_pool_backward(const EdgeFeatures& grad_coarse, const CollapseRecord& record);

// Every fine edge receives the feature of the coarse edge it was merged into.
EdgeFeatures mesh_unpool(const EdgeFeatures& coarse, const CollapseRecord& record);
EdgeFeatures mesh_unpool_backward(const EdgeFeatures& grad_fine, const CollapseRecord& record);

// Per-vertex mean of the displacement votes of incident edges. `delta` is
// E x 6: columns 0..2 move edges[e][0], columns 3..5 move edges[e][1].
std::vector<Vec3> vertex_displacements(const EdgeTopology& topology, const EdgeFeatures& delta);
TriangleMesh apply_edge_displacements(const TriangleMesh& mesh, const EdgeTopology& topology,
                                      const EdgeFeatures& delta);
EdgeFeatures apply_edge_displacements_backward(const EdgeTopology& topology,
                                               const std::vector<Vec3>& grad_vertices);

struct ResidualBlockSpec {
  int in_channels;
  int out_channels;
};

struct Prior3DConfig {
  std::vector<ResidualBlockSpec> blocks{{6, 32}, {32, 64}, {64, 128}, {128, 128}, {128, 64}, {64, 6}};
  int convs_per_block = 3;
  // Pools follow the blocks at pool_after (0-based); unpools mirror them.
  std::vector<int> pool_after{1, 2};
  std::vector<double> pool_proportions{0.8, 0.8};
  int steps = 2000;
  double learning_rate = 1e-3;
  LossWeights weights;
  // Per-step surface samples; 0 means "point-cloud size", always capped.
  int samples_per_step = 0;
  int max_samples_per_step = 25000;
  // Divide each Chamfer direction by its point count and the edge term by the
  // number of directed edges before weighting.
  bool mean_normalized_loss = true;
  double output_init_scale = 0.01;
  std::uint64_t seed = 1;
};

// The residual edge-graph network: conv blocks with two pool/unpool pairs.
class Prior3DNetwork {
public:
  Prior3DNetwork(const Prior3DConfig& config, std::uint64_t seed);

  // Runs the network on the given topology and caches activations for backward().
  EdgeFeatures forward(const EdgeFeatures& input, const EdgeTopology& topology);
  // Accumulates parameter gradients from d(loss)/d(output) of the last forward.
  EdgeFeatures backward(const EdgeFeatures& grad_output);

  void zero_grad();
  std::vector<ParamView> parameters();
  int num_parameters() const;

  // Flat access for finite-difference checks.
  std::vector<double*> parameter_pointers();
  std::vector<double> gradient_values() const;

  int pool_count() const { return static_cast<int>(config_.pool_after.size()); }

private:
  struct Conv {
    Eigen::MatrixXd weight, grad_weight;
    Eigen::VectorXd bias, grad_bias;
  };
  struct Block {
    std::vector<Conv> convs;
    bool final_relu = true;
  };
  struct BlockCache {
    const EdgeTopology* topology = nullptr;
    EdgeFeatures input;
    std::vector<EdgeFeatures> conv_inputs;  // input seen by each conv
    std::vector<EdgeFeatures> conv_outputs;
    EdgeFeatures pre_activation;
  };
  enum class OpKind { Block, Pool, Unpool };
  struct Op {
    OpKind kind;
    int index;
  };

  EdgeFeatures block_forward(int b, const EdgeFeatures& x, const EdgeTopology& topology);
  EdgeFeatures block_backward(int b, const EdgeFeatures& grad);

  Prior3DConfig config_;
  std::vector<Block> blocks_;
  std::vector<Op> plan_;
  std::vector<BlockCache> cache_;
  std::vector<EdgeTopology> pooled_topologies_;
  std::vector<CollapseRecord> records_;
};

struct Prior3DLogEntry {
  int step;
  double chamfer;  // Chamfer sum (both directions)
  double edge;     // edge-length sum
  double total;    // weighted objective actually minimised
};

struct Prior3DResult {
  TriangleMesh mesh;
  std::vector<Prior3DLogEntry> log;
};

using Prior3DStepCallback = std::function<void(const Prior3DLogEntry&)>;

// Fits the network output so the displaced mesh matches the cloud. Requires a
// watertight mesh. Throws OptimizationError on a non-finite loss.
Prior3DResult optimize_3d_prior(const TriangleMesh& mesh, std::span<const Vec3> cloud, const Prior3DConfig& config,
                                 const Prior3DStepCallback& on_step = {});

// Same optimisation for an open manifold region (used on mesh partitions).
Prior3DResult optimize_3d_prior_region(const TriangleMesh& mesh, std::span<const Vec3> cloud,
                                       const Prior3DConfig& config, const Prior3DStepCallback& on_step = {});

// Writes "step chamfer edge total" lines.
std::string format_loss_log(const std::vector<Prior3DLogEntry>& log);

}  // namespace hsp
