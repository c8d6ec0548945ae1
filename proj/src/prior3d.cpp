#include "hsp/prior3d.hpp"

#include "hsp/error.hpp"
#include "hsp/seed.hpp"
#include "hsp/kdtree.hpp"
#include "hsp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <random>
#include <unordered_map>

namespace hsp {

EdgeFeatures init_edge_noise(const EdgeTopology& topology, std::uint64_t seed, double stddev) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, stddev);
  EdgeFeatures z(topology.num_edges(), 6);
  for (int e = 0; e < z.rows(); ++e) {
    for (int c = 0; c < 6; ++c) z(e, c) = normal(rng);
  }
  return z;
}

namespace {

inline int neighbor_or_self(const EdgeTopology& topo, int e, int slot) {
  const int n = topo.neighbors[e][slot];
  return n == kInvalid ? e : n;
}

}  // namespace

Eigen::MatrixXd gather_mesh_conv_inputs(const EdgeFeatures& x, const EdgeTopology& topo) {
  const int ne = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  Eigen::MatrixXd g(ne, 5 * c);
  for (int ch = 0; ch < c; ++ch) {
    const auto col = x.col(ch);
    for (int e = 0; e < ne; ++e) {
      const double a = col(neighbor_or_self(topo, e, 0));
      const double b = col(neighbor_or_self(topo, e, 1));
      const double cc = col(neighbor_or_self(topo, e, 2));
      const double d = col(neighbor_or_self(topo, e, 3));
      g(e, kernel_column(ch, 0)) = col(e);
      g(e, kernel_column(ch, 1)) = std::abs(a - cc);
      g(e, kernel_column(ch, 2)) = a + cc;
      g(e, kernel_column(ch, 3)) = std::abs(b - d);
      g(e, kernel_column(ch, 4)) = b + d;
    }
  }
  return g;
}

EdgeFeatures mesh_conv(const EdgeFeatures& features, const EdgeTopology& topology, const Eigen::MatrixXd& kernel,
                       const Eigen::VectorXd* bias) {
  if (features.rows() != topology.num_edges()) {
    throw ParameterError("mesh_conv: feature rows " + std::to_string(features.rows()) + " != edge count " +
                         std::to_string(topology.num_edges()));
  }
  if (kernel.cols() != 5 * features.cols()) {
    throw ParameterError("mesh_conv: kernel has " + std::to_string(kernel.cols()) + " columns, expected " +
                         std::to_string(5 * features.cols()));
  }
  if (bias && bias->size() != kernel.rows()) throw ParameterError("mesh_conv: bias size mismatch");
  EdgeFeatures out = gather_mesh_conv_inputs(features, topology) * kernel.transpose();
  if (bias) out.rowwise() += bias->transpose();
  return out;
}

MeshConvGradients mesh_conv_backward(const EdgeFeatures& x, const EdgeTopology& topo, const Eigen::MatrixXd& kernel,
                                     const EdgeFeatures& grad_out) {
  const int ne = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  MeshConvGradients g;
  const Eigen::MatrixXd gathered = gather_mesh_conv_inputs(x, topo);
  g.kernel = grad_out.transpose() * gathered;
  g.bias = grad_out.colwise().sum().transpose();
  const Eigen::MatrixXd dg = grad_out * kernel;
  g.input = EdgeFeatures::Zero(ne, c);
  for (int ch = 0; ch < c; ++ch) {
    const auto col = x.col(ch);
    auto dx = g.input.col(ch);
    for (int e = 0; e < ne; ++e) {
      const int ia = neighbor_or_self(topo, e, 0), ib = neighbor_or_self(topo, e, 1);
      const int ic = neighbor_or_self(topo, e, 2), id = neighbor_or_self(topo, e, 3);
      dx(e) += dg(e, kernel_column(ch, 0));
      const double s1 = dg(e, kernel_column(ch, 1));
      const double sign_ac = col(ia) > col(ic) ? 1.0 : (col(ia) < col(ic) ? -1.0 : 0.0);
      dx(ia) += sign_ac * s1;
      dx(ic) -= sign_ac * s1;
      const double s2 = dg(e, kernel_column(ch, 2));
      dx(ia) += s2;
      dx(ic) += s2;
      const double s3 = dg(e, kernel_column(ch, 3));
      const double sign_bd = col(ib) > col(id) ? 1.0 : (col(ib) < col(id) ? -1.0 : 0.0);
      dx(ib) += sign_bd * s3;
      dx(id) -= sign_bd * s3;
      const double s4 = dg(e, kernel_column(ch, 4));
      dx(ib) += s4;
      dx(id) += s4;
    }
  }
  return g;
}

namespace {

class EdgeCollapser {
public:
  EdgeCollapser(const EdgeTopology& topo) : topo_(topo) {
    const int ne = topo.num_edges();
    faces_ = topo.faces;
    face_alive_.assign(faces_.size(), 1);
    vfaces_.assign(topo.num_vertices, {});
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      for (int v : faces_[f]) vfaces_[v].push_back(f);
    }
    endpoints_ = topo.edges;
    uf_.resize(ne);
    std::iota(uf_.begin(), uf_.end(), 0);
    edge_alive_.assign(ne, 1);
    boundary_.assign(topo.num_vertices, 0);
    for (int e = 0; e < ne; ++e) {
      key_[edge_key(endpoints_[e][0], endpoints_[e][1])] = e;
      if (topo.is_boundary(e)) {
        boundary_[endpoints_[e][0]] = 1;
        boundary_[endpoints_[e][1]] = 1;
      }
    }
    for (int v = 0; v < topo.num_vertices; ++v) alive_vertices_ += vfaces_[v].empty() ? 0 : 1;
  }

  int find(int e) {
    while (uf_[e] != e) {
      uf_[e] = uf_[uf_[e]];
      e = uf_[e];
    }
    return e;
  }

  bool try_collapse(int e) {
    if (!edge_alive_[e]) return false;
    const int u = endpoints_[e][0], v = endpoints_[e][1];
    if (boundary_[u] || boundary_[v] || alive_vertices_ <= 4) return false;
    std::vector<int> shared;
    std::vector<int> opposite;
    for (int f : vfaces_[u]) {
      if (!face_alive_[f]) continue;
      const Face& t = faces_[f];
      if (t[0] != v && t[1] != v && t[2] != v) continue;
      shared.push_back(f);
      for (int x : t) {
        if (x != u && x != v) opposite.push_back(x);
      }
    }
    if (shared.size() != 2 || opposite[0] == opposite[1]) return false;
    const auto nu = ring(u), nv = ring(v);
    std::vector<int> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    std::vector<int> opp = opposite;
    std::sort(opp.begin(), opp.end());
    if (common != opp) return false;
    for (int w : opposite) {
      if (ring(w).size() <= 3) return false;
    }

    const int w1 = opposite[0], w2 = opposite[1];
    const int e_uw1 = key_.at(edge_key(u, w1)), e_uw2 = key_.at(edge_key(u, w2));
    const int e_vw1 = key_.at(edge_key(v, w1)), e_vw2 = key_.at(edge_key(v, w2));
    uf_[e_vw1] = e_uw1;
    uf_[e] = e_uw1;
    uf_[e_vw2] = e_uw2;
    edge_alive_[e] = edge_alive_[e_vw1] = edge_alive_[e_vw2] = 0;
    key_.erase(edge_key(u, v));
    key_.erase(edge_key(v, w1));
    key_.erase(edge_key(v, w2));
    for (int x : nv) {
      if (x == u || x == w1 || x == w2) continue;
      const auto it = key_.find(edge_key(v, x));
      const int r = it->second;
      key_.erase(it);
      endpoints_[r] = {std::min(u, x), std::max(u, x)};
      key_[edge_key(u, x)] = r;
    }
    for (int f : shared) face_alive_[f] = 0;
    for (int f : vfaces_[v]) {
      if (!face_alive_[f]) continue;
      for (int& x : faces_[f]) {
        if (x == v) x = u;
      }
      vfaces_[u].push_back(f);
    }
    vfaces_[v].clear();
    auto& fl = vfaces_[u];
    fl.erase(std::remove_if(fl.begin(), fl.end(), [&](int f) { return !face_alive_[f]; }), fl.end());
    --alive_vertices_;
    ++collapses_;
    return true;
  }

  PoolResult finish(const EdgeFeatures& features) {
    PoolResult out;
    TriangleMesh coarse;
    std::vector<int> remap(topo_.num_vertices, -1);
    int nv = 0;
    for (int v = 0; v < topo_.num_vertices; ++v) {
      bool used = false;
      for (int f : vfaces_[v]) used = used || face_alive_[f];
      if (used) remap[v] = nv++;
    }
    coarse.vertices.assign(nv, Vec3::Zero());
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      if (face_alive_[f]) coarse.faces.push_back({remap[faces_[f][0]], remap[faces_[f][1]], remap[faces_[f][2]]});
    }
    out.topology = build_edge_topology(coarse);
    std::unordered_map<std::uint64_t, int> coarse_index;
    for (int e = 0; e < out.topology.num_edges(); ++e) {
      coarse_index[edge_key(out.topology.edges[e][0], out.topology.edges[e][1])] = e;
    }
    const int ne = topo_.num_edges();
    CollapseRecord& rec = out.record;
    rec.fine_edges = ne;
    rec.coarse_edges = out.topology.num_edges();
    rec.collapses = collapses_;
    rec.parent.resize(ne);
    rec.group_size.assign(rec.coarse_edges, 0);
    for (int e = 0; e < ne; ++e) {
      const int r = find(e);
      const int p = coarse_index.at(edge_key(remap[endpoints_[r][0]], remap[endpoints_[r][1]]));
      rec.parent[e] = p;
      ++rec.group_size[p];
    }
    out.features = EdgeFeatures::Zero(rec.coarse_edges, features.cols());
    for (int e = 0; e < ne; ++e) out.features.row(rec.parent[e]) += features.row(e);
    for (int p = 0; p < rec.coarse_edges; ++p) out.features.row(p) /= static_cast<double>(rec.group_size[p]);
    return out;
  }

  int live_edges() const { return topo_.num_edges() - 3 * collapses_; }

private:
  std::vector<int> ring(int v) const {
    std::vector<int> out;
    for (int f : vfaces_[v]) {
      if (!face_alive_[f]) continue;
      for (int x : faces_[f]) {
        if (x != v) out.push_back(x);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  const EdgeTopology& topo_;
  std::vector<Face> faces_;
  std::vector<char> face_alive_;
  std::vector<std::vector<int>> vfaces_;
  std::vector<std::array<int, 2>> endpoints_;
  std::vector<int> uf_;
  std::vector<char> edge_alive_;
  std::vector<char> boundary_;
  std::unordered_map<std::uint64_t, int> key_;
  int alive_vertices_ = 0;
  int collapses_ = 0;
};

}  // namespace

PoolResult mesh_pool(const EdgeFeatures& features, const EdgeTopology& topology, double keep_fraction) {
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ParameterError("mesh_pool keep_fraction must be in (0,1]");
  if (features.rows() != topology.num_edges()) throw ParameterError("mesh_pool: feature rows != edge count");
  const int ne = topology.num_edges();
  const int target = static_cast<int>(std::ceil(keep_fraction * ne - 1e-9));
  EdgeCollapser collapser(topology);
  if (target < ne) {
    std::vector<int> order(ne);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> norm(ne);
    for (int e = 0; e < ne; ++e) norm[e] = features.row(e).squaredNorm();
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return norm[a] < norm[b]; });
    for (int e : order) {
      if (collapser.live_edges() <= target) break;
      collapser.try_collapse(e);
    }
  }
  return collapser.finish(features);
}

EdgeFeatures mesh_pool_backward(const EdgeFeatures& grad_coarse, const CollapseRecord& record) {
  if (grad_coarse.rows() != record.coarse_edges) throw ParameterError("mesh_pool_backward: shape mismatch");
  EdgeFeatures g(record.fine_edges, grad_coarse.cols());
  for (int e = 0; e < record.fine_edges; ++e) {
    const int p = record.parent[e];
    g.row(e) = grad_coarse.row(p) / static_cast<double>(record.group_size[p]);
  }
  return g;
}

EdgeFeatures mesh_unpool(const EdgeFeatures& coarse, const CollapseRecord& record) {
  if (coarse.rows() != record.coarse_edges) {
    throw ParameterError("mesh_unpool: " + std::to_string(coarse.rows()) + " rows, record expects " +
                         std::to_string(record.coarse_edges));
  }
  EdgeFeatures fine(record.fine_edges, coarse.cols());
  for (int e = 0; e < record.fine_edges; ++e) fine.row(e) = coarse.row(record.parent[e]);
  return fine;
}

EdgeFeatures mesh_unpool_backward(const EdgeFeatures& grad_fine, const CollapseRecord& record) {
  if (grad_fine.rows() != record.fine_edges) throw ParameterError("mesh_unpool_backward: shape mismatch");
  EdgeFeatures g = EdgeFeatures::Zero(record.coarse_edges, grad_fine.cols());
  for (int e = 0; e < record.fine_edges; ++e) g.row(record.parent[e]) += grad_fine.row(e);
  return g;
}

namespace {

std::vector<int> vote_counts(const EdgeTopology& topo) {
  std::vector<int> count(topo.num_vertices, 0);
  for (const auto& [a, b] : topo.edges) {
    ++count[a];
    ++count[b];
  }
  return count;
}

}  // namespace

std::vector<Vec3> vertex_displacements(const EdgeTopology& topo, const EdgeFeatures& delta) {
  if (delta.rows() != topo.num_edges() || delta.cols() != 6) {
    throw ParameterError("edge displacements must be E x 6");
  }
  std::vector<Vec3> disp(topo.num_vertices, Vec3::Zero());
  const auto count = vote_counts(topo);
  for (int e = 0; e < topo.num_edges(); ++e) {
    disp[topo.edges[e][0]] += Vec3(delta(e, 0), delta(e, 1), delta(e, 2));
    disp[topo.edges[e][1]] += Vec3(delta(e, 3), delta(e, 4), delta(e, 5));
  }
  for (int v = 0; v < topo.num_vertices; ++v) {
    if (count[v] > 0) disp[v] /= static_cast<double>(count[v]);
  }
  return disp;
}

TriangleMesh apply_edge_displacements(const TriangleMesh& mesh, const EdgeTopology& topology,
                                      const EdgeFeatures& delta) {
  if (topology.num_vertices != mesh.num_vertices()) throw ParameterError("topology does not match mesh");
  const auto disp = vertex_displacements(topology, delta);
  TriangleMesh out = mesh;
  for (int v = 0; v < out.num_vertices(); ++v) out.vertices[v] += disp[v];
  return out;
}

EdgeFeatures apply_edge_displacements_backward(const EdgeTopology& topo, const std::vector<Vec3>& grad_vertices) {
  const auto count = vote_counts(topo);
  EdgeFeatures g(topo.num_edges(), 6);
  for (int e = 0; e < topo.num_edges(); ++e) {
    for (int side = 0; side < 2; ++side) {
      const int v = topo.edges[e][side];
      const Vec3 gv = grad_vertices[v] / static_cast<double>(count[v]);
      g(e, 3 * side + 0) = gv.x();
      g(e, 3 * side + 1) = gv.y();
      g(e, 3 * side + 2) = gv.z();
    }
  }
  return g;
}

// --- network ---------------------------------------------------------------

Prior3DNetwork::Prior3DNetwork(const Prior3DConfig& config, std::uint64_t seed) : config_(config) {
  const int nb = static_cast<int>(config.blocks.size());
  if (nb == 0 || config.convs_per_block < 1) throw ParameterError("3D prior needs at least one block and conv");
  if (config.pool_after.size() != config.pool_proportions.size()) {
    throw ParameterError("pool_after and pool_proportions differ in length");
  }
  for (std::size_t i = 1; i < config.blocks.size(); ++i) {
    if (config.blocks[i].in_channels != config.blocks[i - 1].out_channels) {
      throw ParameterError("3D prior block channels do not chain");
    }
  }
  if (config.blocks.front().in_channels != 6 || config.blocks.back().out_channels != 6) {
    throw ParameterError("3D prior must map 6 input channels to 6 output channels");
  }

  std::mt19937_64 rng(seed);
  blocks_.resize(nb);
  for (int b = 0; b < nb; ++b) {
    blocks_[b].final_relu = b + 1 < nb;
    for (int k = 0; k < config.convs_per_block; ++k) {
      const int cin = k == 0 ? config.blocks[b].in_channels : config.blocks[b].out_channels;
      const int cout = config.blocks[b].out_channels;
      const double bound = 1.0 / std::sqrt(5.0 * cin);
      std::uniform_real_distribution<double> uni(-bound, bound);
      Conv conv;
      conv.weight.resize(cout, 5 * cin);
      conv.bias.resize(cout);
      for (int i = 0; i < conv.weight.size(); ++i) conv.weight.data()[i] = uni(rng);
      for (int i = 0; i < cout; ++i) conv.bias[i] = uni(rng);
      conv.grad_weight = Eigen::MatrixXd::Zero(cout, 5 * cin);
      conv.grad_bias = Eigen::VectorXd::Zero(cout);
      blocks_[b].convs.push_back(std::move(conv));
    }
  }
  // Small output layer so the initial displacement field is near zero.
  Conv& last = blocks_.back().convs.back();
  last.weight *= config.output_init_scale;
  last.bias *= config.output_init_scale;

  // Pools after pool_after[k]; the matching unpool precedes block nb - pool_after[k].
  std::vector<int> pending;
  for (int b = 0; b < nb; ++b) {
    for (std::size_t k = 0; k < config.pool_after.size(); ++k) {
      if (nb - config.pool_after[k] == b) {
        if (pending.empty() || pending.back() != static_cast<int>(k)) {
          throw ParameterError("pool/unpool layout does not nest");
        }
        pending.pop_back();
        plan_.push_back({OpKind::Unpool, static_cast<int>(k)});
      }
    }
    plan_.push_back({OpKind::Block, b});
    for (std::size_t k = 0; k < config.pool_after.size(); ++k) {
      if (config.pool_after[k] == b) {
        plan_.push_back({OpKind::Pool, static_cast<int>(k)});
        pending.push_back(static_cast<int>(k));
      }
    }
  }
  if (!pending.empty()) throw ParameterError("every pool needs a matching unpool");
}

EdgeFeatures Prior3DNetwork::block_forward(int b, const EdgeFeatures& x, const EdgeTopology& topo) {
  Block& block = blocks_[b];
  BlockCache& c = cache_[b];
  c.topology = &topo;
  c.input = x;
  c.conv_inputs.clear();
  c.conv_outputs.clear();
  EdgeFeatures h = x;
  for (std::size_t k = 0; k < block.convs.size(); ++k) {
    if (k > 0) h = h.cwiseMax(0.0);
    c.conv_inputs.push_back(h);
    h = mesh_conv(h, topo, block.convs[k].weight, &block.convs[k].bias);
    c.conv_outputs.push_back(h);
  }
  if (block.convs.size() > 1) h += c.conv_outputs.front();
  c.pre_activation = h;
  return block.final_relu ? EdgeFeatures(h.cwiseMax(0.0)) : h;
}

EdgeFeatures Prior3DNetwork::block_backward(int b, const EdgeFeatures& grad) {
  Block& block = blocks_[b];
  BlockCache& c = cache_[b];
  EdgeFeatures g = grad;
  if (block.final_relu) g = g.cwiseProduct((c.pre_activation.array() > 0.0).cast<double>().matrix());
  const int n = static_cast<int>(block.convs.size());
  EdgeFeatures residual = n > 1 ? g : EdgeFeatures();
  for (int k = n - 1; k >= 0; --k) {
    if (k == 0 && n > 1) g += residual;
    const MeshConvGradients cg = mesh_conv_backward(c.conv_inputs[k], *c.topology, block.convs[k].weight, g);
    block.convs[k].grad_weight += cg.kernel;
    block.convs[k].grad_bias += cg.bias;
    g = cg.input;
    if (k > 0) g = g.cwiseProduct((c.conv_outputs[k - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

EdgeFeatures Prior3DNetwork::forward(const EdgeFeatures& input, const EdgeTopology& topology) {
  cache_.assign(blocks_.size(), {});
  pooled_topologies_.clear();
  pooled_topologies_.reserve(config_.pool_after.size());
  records_.assign(config_.pool_after.size(), {});
  std::vector<const EdgeTopology*> stack{&topology};
  EdgeFeatures x = input;
  for (const Op& op : plan_) {
    switch (op.kind) {
      case OpKind::Block:
        x = block_forward(op.index, x, *stack.back());
        break;
      case OpKind::Pool: {
        PoolResult pr = mesh_pool(x, *stack.back(), config_.pool_proportions[op.index]);
        x = std::move(pr.features);
        records_[op.index] = std::move(pr.record);
        pooled_topologies_.push_back(std::move(pr.topology));
        stack.push_back(&pooled_topologies_.back());
        break;
      }
      case OpKind::Unpool:
        x = mesh_unpool(x, records_[op.index]);
        stack.pop_back();
        break;
    }
  }
  return x;
}

EdgeFeatures Prior3DNetwork::backward(const EdgeFeatures& grad_output) {
  EdgeFeatures g = grad_output;
  for (auto it = plan_.rbegin(); it != plan_.rend(); ++it) {
    switch (it->kind) {
      case OpKind::Block:
        g = block_backward(it->index, g);
        break;
      case OpKind::Pool:
        g = mesh_pool_backward(g, records_[it->index]);
        break;
      case OpKind::Unpool:
        g = mesh_unpool_backward(g, records_[it->index]);
        break;
    }
  }
  return g;
}

void Prior3DNetwork::zero_grad() {
  for (Block& b : blocks_) {
    for (Conv& c : b.convs) {
      c.grad_weight.setZero();
      c.grad_bias.setZero();
    }
  }
}

std::vector<ParamView> Prior3DNetwork::parameters() {
  std::vector<ParamView> out;
  for (Block& b : blocks_) {
    for (Conv& c : b.convs) {
      out.push_back({{c.weight.data(), static_cast<std::size_t>(c.weight.size())},
                     {c.grad_weight.data(), static_cast<std::size_t>(c.grad_weight.size())}});
      out.push_back({{c.bias.data(), static_cast<std::size_t>(c.bias.size())},
                     {c.grad_bias.data(), static_cast<std::size_t>(c.grad_bias.size())}});
    }
  }
  return out;
}

int Prior3DNetwork::num_parameters() const {
  int n = 0;
  for (const Block& b : blocks_) {
    for (const Conv& c : b.convs) n += static_cast<int>(c.weight.size() + c.bias.size());
  }
  return n;
}

std::vector<double*> Prior3DNetwork::parameter_pointers() {
  std::vector<double*> out;
  for (const ParamView& p : parameters()) {
    for (double& v : p.value) out.push_back(&v);
  }
  return out;
}

std::vector<double> Prior3DNetwork::gradient_values() const {
  std::vector<double> out;
  for (const Block& b : blocks_) {
    for (const Conv& c : b.convs) {
      out.insert(out.end(), c.grad_weight.data(), c.grad_weight.data() + c.grad_weight.size());
      out.insert(out.end(), c.grad_bias.data(), c.grad_bias.data() + c.grad_bias.size());
    }
  }
  return out;
}

// --- optimisation ----------------------------------------------------------

namespace {

struct StepEvaluation {
  Prior3DLogEntry entry;
  std::vector<Vec3> grad_vertices;
};

StepEvaluation evaluate_step(const TriangleMesh& deformed, const EdgeTopology& topo, std::span<const Vec3> cloud,
                             const KdTree& cloud_tree, int samples, std::uint64_t sample_seed,
                             const Prior3DConfig& config, bool with_gradient) {
  StepEvaluation ev;
  const auto sp = sample_surface(deformed, samples, sample_seed);
  const auto positions = positions_of(sp);
  const ChamferTerms ch = chamfer_terms(positions, cloud, cloud_tree, with_gradient);
  std::vector<Vec3> grad_edge;
  const double edge = edge_length_loss(deformed, topo, with_gradient ? &grad_edge : nullptr);

  const double w_sc = config.mean_normalized_loss ? 1.0 / static_cast<double>(positions.size()) : 1.0;
  const double w_cs = config.mean_normalized_loss ? 1.0 / static_cast<double>(cloud.size()) : 1.0;
  const double w_e = config.mean_normalized_loss ? 1.0 / (2.0 * std::max(1, topo.num_edges())) : 1.0;
  const double l0 = config.weights.lambda0, l1 = config.weights.lambda1;

  ev.entry.chamfer = ch.total();
  ev.entry.edge = edge;
  ev.entry.total = l0 * (w_sc * ch.samples_to_cloud + w_cs * ch.cloud_to_samples) + l1 * w_e * edge;
  if (!with_gradient) return ev;

  ev.grad_vertices.assign(deformed.vertices.size(), Vec3::Zero());
  for (std::size_t i = 0; i < sp.size(); ++i) {
    const Vec3 g = l0 * (w_sc * ch.grad_samples_to_cloud[i] + w_cs * ch.grad_cloud_to_samples[i]);
    const Face& t = deformed.faces[sp[i].face_id];
    for (int k = 0; k < 3; ++k) ev.grad_vertices[t[k]] += sp[i].barycentric[k] * g;
  }
  for (std::size_t v = 0; v < grad_edge.size(); ++v) ev.grad_vertices[v] += l1 * w_e * grad_edge[v];
  return ev;
}

Prior3DResult run_prior3d(const TriangleMesh& mesh, std::span<const Vec3> cloud, const Prior3DConfig& config,
                          const Prior3DStepCallback& on_step) {
  if (config.steps < 1) throw ParameterError("3D prior needs steps >= 1");
  if (!(config.learning_rate > 0.0)) throw ParameterError("3D prior needs a positive learning rate");
  if (cloud.empty()) throw ParameterError("3D prior needs a non-empty point cloud");
  const EdgeTopology topo = build_edge_topology(mesh);
  const KdTree cloud_tree(cloud);
  const int samples = config.samples_per_step > 0
                          ? config.samples_per_step
                          : std::min(static_cast<int>(cloud.size()), config.max_samples_per_step);

  Prior3DNetwork net(config, mix_seed(config.seed, 1));
  const EdgeFeatures z = init_edge_noise(topo, mix_seed(config.seed, 2));
  Adam adam(config.learning_rate);
  auto params = net.parameters();

  Prior3DResult result;
  result.log.reserve(config.steps + 1);
  TriangleMesh deformed = mesh;
  for (int step = 0; step < config.steps; ++step) {
    const EdgeFeatures out = net.forward(z, topo);
    const auto disp = vertex_displacements(topo, out);
    for (int v = 0; v < mesh.num_vertices(); ++v) deformed.vertices[v] = mesh.vertices[v] + disp[v];
    StepEvaluation ev =
        evaluate_step(deformed, topo, cloud, cloud_tree, samples, mix_seed(config.seed, 1000 + step), config, true);
    ev.entry.step = step;
    if (!std::isfinite(ev.entry.total)) throw OptimizationError("3D prior loss became non-finite", step);
    result.log.push_back(ev.entry);
    if (on_step) on_step(ev.entry);

    net.zero_grad();
    net.backward(apply_edge_displacements_backward(topo, ev.grad_vertices));
    adam.step(params);
  }

  const EdgeFeatures out = net.forward(z, topo);
  result.mesh = apply_edge_displacements(mesh, topo, out);
  // Final entry reuses the step-0 sample seed so it is comparable with step 0.
  StepEvaluation last =
      evaluate_step(result.mesh, topo, cloud, cloud_tree, samples, mix_seed(config.seed, 1000), config, false);
  last.entry.step = config.steps;
  if (!std::isfinite(last.entry.total)) throw OptimizationError("3D prior loss became non-finite", config.steps);
  result.log.push_back(last.entry);
  if (on_step) on_step(last.entry);
  return result;
}

}  // namespace

Prior3DResult optimize_3d_prior(const TriangleMesh& mesh, std::span<const Vec3> cloud, const Prior3DConfig& config,
                                const Prior3DStepCallback& on_step) {
  if (!is_watertight(mesh)) throw TopologyError("optimize_3d_prior requires a watertight mesh");
  return run_prior3d(mesh, cloud, config, on_step);
}

Prior3DResult optimize_3d_prior_region(const TriangleMesh& mesh, std::span<const Vec3> cloud,
                                       const Prior3DConfig& config, const Prior3DStepCallback& on_step) {
  return run_prior3d(mesh, cloud, config, on_step);
}

std::string format_loss_log(const std::vector<Prior3DLogEntry>& log) {
  std::string out;
  char buf[160];
  for (const Prior3DLogEntry& e : log) {
    std::snprintf(buf, sizeof(buf), "%d %.10g %.10g %.10g\n", e.step, e.chamfer, e.edge, e.total);
    out += buf;
  }
  return out;
}

}  // namespace hsp
