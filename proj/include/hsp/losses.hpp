#pragma once

#include "hsp/geometry.hpp"
#include "hsp/kdtree.hpp"
#include "hsp/topology.hpp"

#include <span>
#include <vector>

namespace hsp {

struct LossWeights {
  double lambda0 = 1.0;  // Chamfer
  double lambda1 = 0.2;  // edge length
};

// The two directional sums of the squared Chamfer loss and their gradients
// with respect to the sample positions. Nearest-neighbour ties go to the
// lowest index.
struct ChamferTerms {
  double samples_to_cloud = 0.0;  // sum over samples of min_q |p - q|^2
  double cloud_to_samples = 0.0;  // sum over cloud of min_p |p - q|^2
  std::vector<Vec3> grad_samples_to_cloud;
  std::vector<Vec3> grad_cloud_to_samples;

  double total() const { return samples_to_cloud + cloud_to_samples; }
};

ChamferTerms chamfer_terms(std::span<const Vec3> samples, std::span<const Vec3> cloud, const KdTree& cloud_tree,
                           bool with_gradient);

// Sum over samples of squared distance to the nearest cloud point, plus the
// symmetric sum over cloud points. Optionally writes d(loss)/d(samples).
double chamfer_loss(std::span<const Vec3> samples, std::span<const Vec3> cloud,
                    std::vector<Vec3>* grad_samples = nullptr);

// Sum over vertices p of sum over one-ring k of |p - k|^2 (each edge counted
// from both ends). Optionally writes d(loss)/d(vertices).
double edge_length_loss(const TriangleMesh& mesh, const EdgeTopology& topology,
                        std::vector<Vec3>* grad_vertices = nullptr);

double total_geometry_loss(std::span<const Vec3> samples, std::span<const Vec3> cloud, const TriangleMesh& mesh,
                           const EdgeTopology& topology, const LossWeights& weights);

}  // namespace hsp
