#pragma once

#include "hsp/geometry.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace hsp {

struct MetricReport {
  double f_score = 0.0;             // [0, 100]
  double chamfer = 0.0;
  double emd = 0.0;
  double normal_consistency = 0.0;  // [-1, 1]

  // Flat `key=value` lines, one per field.
  std::string to_record() const;
  static MetricReport from_record(const std::string& text);
};

// Harmonic mean of precision and recall given per-point distances to the other set.
double f_score_from_distances(std::span<const double> pred_to_gt, std::span<const double> gt_to_pred,
                              double threshold);

// Point-set F-score in percent. Throws ParameterError for threshold <= 0.
double f_score(std::span<const Vec3> pred_points, std::span<const Vec3> gt_points, double threshold);

// F-score where each sample's distance is measured to the other mesh's surface.
double f_score_surface(const TriangleMesh& pred, std::span<const Vec3> pred_samples, const TriangleMesh& gt,
                       std::span<const Vec3> gt_samples, double threshold);

// Mean unsquared nearest-neighbour distance, summed over both directions.
double chamfer_metric(std::span<const Vec3> pred_points, std::span<const Vec3> gt_points);

// Exact minimum-cost perfect matching (Hungarian algorithm); returns the total
// cost and writes the assignment (row -> column) if requested.
double assignment_cost(const std::vector<double>& cost, int n, std::vector<int>* assignment = nullptr);

// Entropic optimal transport cost (log-domain Sinkhorn with epsilon scaling)
// for uniform marginals; returns the plan's total cost with unit mass.
double sinkhorn_cost(const std::vector<double>& cost, int n, double final_epsilon_fraction = 3e-3);

// Mean per-point matching cost of two equal-size sets. Exact up to
// `exact_limit` points, entropic above it. Throws ParameterError on unequal sizes.
double emd_metric(std::span<const Vec3> pred_points, std::span<const Vec3> gt_points, int exact_limit = 4096);

// Seeded uniform subsample without replacement (returns all points if m >= size).
std::vector<Vec3> subsample(std::span<const Vec3> points, int m, std::uint64_t seed);

struct OrientedSample {
  Vec3 position;
  Vec3 normal;
};

std::vector<OrientedSample> sample_with_normals(const TriangleMesh& mesh, int k, std::uint64_t seed);

// Symmetric mean of |n . n'| between each oriented sample and its nearest
// neighbour on the other mesh.
double normal_consistency(const std::vector<OrientedSample>& a, const std::vector<OrientedSample>& b);
double normal_consistency(const TriangleMesh& pred, const TriangleMesh& gt, int k, std::uint64_t seed);

}  // namespace hsp
