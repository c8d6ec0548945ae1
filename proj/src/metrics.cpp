#include "hsp/metrics.hpp"

#include "hsp/error.hpp"
#include "hsp/kdtree.hpp"
#include "hsp/projection.hpp"
#include "hsp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace hsp {

std::string MetricReport::to_record() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "f_score=%.17g\nchamfer=%.17g\nemd=%.17g\nnormal_consistency=%.17g\n", f_score,
                chamfer, emd, normal_consistency);
  return buf;
}

MetricReport MetricReport::from_record(const std::string& text) {
  MetricReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const double value = std::stod(line.substr(eq + 1));
    if (key == "f_score") r.f_score = value;
    else if (key == "chamfer") r.chamfer = value;
    else if (key == "emd") r.emd = value;
    else if (key == "normal_consistency") r.normal_consistency = value;
    else throw ParameterError("unknown metric key: " + key);
  }
  return r;
}

double f_score_from_distances(std::span<const double> pred_to_gt, std::span<const double> gt_to_pred,
                              double threshold) {
  if (!(threshold > 0.0)) throw ParameterError("f_score threshold must be positive");
  if (pred_to_gt.empty() || gt_to_pred.empty()) throw ParameterError("f_score needs non-empty sets");
  auto fraction = [&](std::span<const double> d) {
    std::size_t hit = 0;
    for (double x : d) hit += x <= threshold ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(d.size());
  };
  const double precision = fraction(pred_to_gt);
  const double recall = fraction(gt_to_pred);
  if (precision + recall <= 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

namespace {

std::vector<double> nn_distances(std::span<const Vec3> from, std::span<const Vec3> to) {
  const KdTree tree(to);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = std::sqrt(tree.nearest(from[i]).squared_distance);
  return d;
}

std::vector<double> surface_distances(std::span<const Vec3> from, const TriangleMesh& to) {
  const FaceBvh bvh(to);
  std::vector<double> d(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = (bvh.closest(from[i]).position - from[i]).norm();
  return d;
}

}  // namespace

double f_score(std::span<const Vec3> pred_points, std::span<const Vec3> gt_points, double threshold) {
  if (!(threshold > 0.0)) throw ParameterError("f_score threshold must be positive");
  const auto p2g = nn_distances(pred_points, gt_points);
  const auto g2p = nn_distances(gt_points, pred_points);
  return f_score_from_distances(p2g, g2p, threshold);
}

double f_score_surface(const TriangleMesh& pred, std::span<const Vec3> pred_samples, const TriangleMesh& gt,
                       std::span<const Vec3> gt_samples, double threshold) {
  if (!(threshold > 0.0)) throw ParameterError("f_score threshold must be positive");
  const auto p2g = surface_distances(pred_samples, gt);
  const auto g2p = surface_distances(gt_samples, pred);
  return f_score_from_distances(p2g, g2p, threshold);
}

double chamfer_metric(std::span<const Vec3> pred_points, std::span<const Vec3> gt_points) {
  if (pred_points.empty() || gt_points.empty()) throw ParameterError("chamfer_metric needs non-empty sets");
  const auto p2g = nn_distances(pred_points, gt_points);
  const auto g2p = nn_distances(gt_points, pred_points);
  const double a = std::accumulate(g2p.begin(), g2p.end(), 0.0) / static_cast<double>(g2p.size());
  const double b = std::accumulate(p2g.begin(), p2g.end(), 0.0) / static_cast<double>(p2g.size());
  return a + b;
}

double assignment_cost(const std::vector<double>& cost, int n, std::vector<int>* assignment) {
  // Shortest augmenting path with potentials, O(n^3); 1-based internally.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += cost[static_cast<std::size_t>(i) * n + row_to_col[i]];
  if (assignment) *assignment = std::move(row_to_col);
  return total;
}

double sinkhorn_cost(const std::vector<double>& cost, int n, double final_epsilon_fraction) {
  const double mean_cost = std::accumulate(cost.begin(), cost.end(), 0.0) / static_cast<double>(cost.size());
  const double max_cost = *std::max_element(cost.begin(), cost.end());
  if (max_cost <= 0.0) return 0.0;
  const double eps_final = std::max(final_epsilon_fraction * mean_cost, 1e-12);
  const double log_mass = -std::log(static_cast<double>(n));
  std::vector<double> f(n, 0.0), g(n, 0.0), tmp(n);

  auto lse_rows = [&](double eps) {
    for (int i = 0; i < n; ++i) {
      const double* c = &cost[static_cast<std::size_t>(i) * n];
      double m = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        tmp[j] = (g[j] - c[j]) / eps;
        m = std::max(m, tmp[j]);
      }
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += std::exp(tmp[j] - m);
      f[i] = eps * log_mass - eps * (m + std::log(s));
    }
  };
  // Updates g and returns the largest column-marginal error of the plan before the update.
  auto lse_cols = [&](double eps) {
    std::vector<double> m(n, -std::numeric_limits<double>::infinity()), s(n, 0.0);
    for (int i = 0; i < n; ++i) {
      const double* c = &cost[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) m[j] = std::max(m[j], (f[i] - c[j]) / eps);
    }
    for (int i = 0; i < n; ++i) {
      const double* c = &cost[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) s[j] += std::exp((f[i] - c[j]) / eps - m[j]);
    }
    double err = 0.0;
    for (int j = 0; j < n; ++j) {
      const double lse = m[j] + std::log(s[j]);
      err = std::max(err, std::abs(std::exp(g[j] / eps + lse + std::log(static_cast<double>(n))) - 1.0));
      g[j] = eps * log_mass - eps * lse;
    }
    return err;
  };

  for (double eps = max_cost; ; eps = std::max(eps * 0.5, eps_final)) {
    // Iterate each scale until the column marginals match to a relative tolerance.
    const bool last = eps <= eps_final;
    const double tol = last ? 1e-3 : 1e-1;
    const int cap = last ? 2000 : 100;
    for (int it = 0; it < cap; ++it) {
      lse_rows(eps);
      if (lse_cols(eps) < tol) break;
    }
    if (eps <= eps_final) {
      // Rows are renormalised last so the plan carries exactly unit mass per row.
      lse_rows(eps);
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        const double* c = &cost[static_cast<std::size_t>(i) * n];
        for (int j = 0; j < n; ++j) total += std::exp((f[i] + g[j] - c[j]) / eps) * c[j];
      }
      return total;
    }
  }
}

double emd_metric(std::span<const Vec3> pred_points, std::span<const Vec3> gt_points, int exact_limit) {
  if (pred_points.size() != gt_points.size()) {
    throw ParameterError("emd_metric needs equal-size sets (" + std::to_string(pred_points.size()) + " vs " +
                         std::to_string(gt_points.size()) + ")");
  }
  const int n = static_cast<int>(pred_points.size());
  if (n == 0) throw ParameterError("emd_metric needs non-empty sets");
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = (pred_points[i] - gt_points[j]).norm();
  }
  if (n <= exact_limit) return assignment_cost(cost, n) / n;
  return sinkhorn_cost(cost, n);
}

std::vector<Vec3> subsample(std::span<const Vec3> points, int m, std::uint64_t seed) {
  if (m >= static_cast<int>(points.size())) return {points.begin(), points.end()};
  std::vector<int> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates.
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(idx.size()) - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<Vec3> out(m);
  for (int i = 0; i < m; ++i) out[i] = points[idx[i]];
  return out;
}

std::vector<OrientedSample> sample_with_normals(const TriangleMesh& mesh, int k, std::uint64_t seed) {
  const auto samples = sample_surface(mesh, k, seed);
  std::vector<OrientedSample> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out[i].position = samples[i].position;
    out[i].normal = face_normal(mesh, samples[i].face_id);
  }
  return out;
}

double normal_consistency(const std::vector<OrientedSample>& a, const std::vector<OrientedSample>& b) {
  auto one_way = [](const std::vector<OrientedSample>& from, const std::vector<OrientedSample>& to) {
    std::vector<Vec3> pts(to.size());
    for (std::size_t i = 0; i < to.size(); ++i) pts[i] = to[i].position;
    const KdTree tree(pts);
    double s = 0.0;
    for (const OrientedSample& o : from) s += std::abs(o.normal.dot(to[tree.nearest(o.position).index].normal));
    return s / static_cast<double>(from.size());
  };
  if (a.empty() || b.empty()) throw ParameterError("normal_consistency needs samples on both meshes");
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

double normal_consistency(const TriangleMesh& pred, const TriangleMesh& gt, int k, std::uint64_t seed) {
  return normal_consistency(sample_with_normals(pred, k, seed), sample_with_normals(gt, k, seed));
}

}  // namespace hsp
