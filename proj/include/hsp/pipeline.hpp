#pragma once

#include "hsp/atlas.hpp"
#include "hsp/geometry.hpp"
#include "hsp/image.hpp"
#include "hsp/metrics.hpp"
#include "hsp/prior2d.hpp"
#include "hsp/prior3d.hpp"
#include "hsp/shapes.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hsp {

struct PipelineConfig {
  int iterations = 3;
  int initial_vertices = 2000;
  int max_part_faces = 6000;
  int partition_overlap_rings = 2;
  // Target vertex count of each refinement iteration.
  std::vector<int> refinement_vertex_schedule{5000, 10000, 20000};
  int atlas_resolution = 1024;
  Prior3DConfig prior3d;
  Prior2DConfig prior2d_xyz;
  Prior2DConfig prior2d_rgb;
  bool texture = true;
  // Stop iterating once the RMS vertex motion of an iteration drops below
  // this (normalized frame); 0 disables.
  double early_stop_rms = 0.0;
  std::uint64_t seed = 1;
  std::string checkpoint_dir;  // empty: no checkpoints
};

// Full-scale settings.
PipelineConfig full_preset();
// Workstation-scale settings (see README for what is reduced).
PipelineConfig desk_preset();
PipelineConfig preset_by_name(const std::string& name);

// Throws ParameterError.
void validate(const PipelineConfig& config);

struct EvaluationConfig {
  int samples = 500000;
  double threshold = 0.1;  // in the frame where the GT's longest side is 100
  int emd_points = 1024;
  std::uint64_t seed = 20240;
};

// Similarity transform that maps the GT bounding-box centre to the origin and
// its longest side to `span`.
Normalization evaluation_frame(const TriangleMesh& gt, double span);

// Samples both meshes (same seed), then: surface F-score in the span-100
// frame; Chamfer, EMD (seeded subsample) and normal consistency in the span-1
// frame.
MetricReport evaluate(const TriangleMesh& pred, const TriangleMesh& gt, const EvaluationConfig& config = {});

// Area-uniform samples with per-axis Gaussian noise of std
// noise_fraction * (bounding-box extent on that axis).
PointCloud synthesize_input(const TriangleMesh& gt, int n_points, double noise_fraction, std::uint64_t seed,
                            bool with_colors = false);
// Same, with colors read from the texture at each sample's uv.
PointCloud synthesize_input(const TexturedMesh& gt, int n_points, double noise_fraction, std::uint64_t seed);

// Pairs of faces sharing no vertex whose triangles intersect.
int count_self_intersections(const TriangleMesh& mesh);
double edge_length_stddev(const TriangleMesh& mesh);

struct StageReport {
  int index = 0;
  std::string name;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  int vertices = 0;
  int faces = 0;
  int parts = 1;
  int dropped_points = 0;
  int fallback_vertices = 0;
  double displacement_rms = 0.0;
  bool early_stop = false;
  std::optional<MetricReport> metrics;
};

struct ReconstructionResult {
  TriangleMesh mesh;  // input frame
  UVAtlas atlas;
  Image texture;      // atlas row order; empty when no texture was requested
  Normalization normalization;
  std::vector<StageReport> stages;
  // Metrics of every geometry stage against ReconstructOptions::reference.
  std::vector<MetricReport> per_stage_metrics;
};

struct ReconstructOptions {
  const TriangleMesh* reference = nullptr;  // input frame
  EvaluationConfig evaluation;
  bool resume = false;
  // Stop after this many stages have completed (simulated interruption); -1 runs all.
  int stop_after_stages = -1;
  std::function<void(const std::string&)> log;
};

// Hull, remesh, 3D prior; then per iteration remesh, atlas, sparse XYZ, 2D
// prior, vertex update, 3D prior; finally atlas, sparse RGB, 2D prior, bake.
// Stage failures are rethrown as StageError.
ReconstructionResult reconstruct(const PointCloud& cloud, const PipelineConfig& config,
                                 const ReconstructOptions& options = {});

// 3D prior on the whole mesh or, above max_part_faces, on overlapping parts
// that are averaged back together.
Prior3DResult optimize_3d_partitioned(const TriangleMesh& mesh, const std::vector<Vec3>& cloud,
                                      const Prior3DConfig& config, int max_part_faces, int overlap_rings,
                                      int* parts_out = nullptr);

// mesh.obj (+vt, mtllib), material.mtl, texture.png in `dir`.
void write_textured_obj(const std::string& dir, const ReconstructionResult& result);

}  // namespace hsp
