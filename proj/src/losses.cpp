#include "hsp/losses.hpp"

#include "hsp/error.hpp"

namespace hsp {

ChamferTerms chamfer_terms(std::span<const Vec3> samples, std::span<const Vec3> cloud, const KdTree& cloud_tree,
                           bool with_gradient) {
  if (samples.empty() || cloud.empty()) throw ParameterError("chamfer needs non-empty point sets");
  ChamferTerms out;
  if (with_gradient) {
    out.grad_samples_to_cloud.assign(samples.size(), Vec3::Zero());
    out.grad_cloud_to_samples.assign(samples.size(), Vec3::Zero());
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Neighbor nn = cloud_tree.nearest(samples[i]);
    out.samples_to_cloud += nn.squared_distance;
    if (with_gradient) out.grad_samples_to_cloud[i] = 2.0 * (samples[i] - cloud[nn.index]);
  }
  const KdTree sample_tree(samples);
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const Neighbor nn = sample_tree.nearest(cloud[j]);
    out.cloud_to_samples += nn.squared_distance;
    if (with_gradient) out.grad_cloud_to_samples[nn.index] += 2.0 * (samples[nn.index] - cloud[j]);
  }
  return out;
}

double chamfer_loss(std::span<const Vec3> samples, std::span<const Vec3> cloud, std::vector<Vec3>* grad_samples) {
  const KdTree tree(cloud);
  ChamferTerms t = chamfer_terms(samples, cloud, tree, grad_samples != nullptr);
  if (grad_samples) {
    grad_samples->resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      (*grad_samples)[i] = t.grad_samples_to_cloud[i] + t.grad_cloud_to_samples[i];
    }
  }
  return t.total();
}

double edge_length_loss(const TriangleMesh& mesh, const EdgeTopology& topology, std::vector<Vec3>* grad_vertices) {
  if (topology.num_vertices != mesh.num_vertices()) throw ParameterError("topology does not match mesh");
  if (grad_vertices) grad_vertices->assign(mesh.vertices.size(), Vec3::Zero());
  double loss = 0.0;
  for (const auto& [a, b] : topology.edges) {
    const Vec3 d = mesh.vertices[a] - mesh.vertices[b];
    loss += 2.0 * d.squaredNorm();
    if (grad_vertices) {
      (*grad_vertices)[a] += 4.0 * d;
      (*grad_vertices)[b] -= 4.0 * d;
    }
  }
  return loss;
}

double total_geometry_loss(std::span<const Vec3> samples, std::span<const Vec3> cloud, const TriangleMesh& mesh,
                           const EdgeTopology& topology, const LossWeights& weights) {
  return weights.lambda0 * chamfer_loss(samples, cloud) + weights.lambda1 * edge_length_loss(mesh, topology);
}

}  // namespace hsp
