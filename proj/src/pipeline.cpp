#include "hsp/pipeline.hpp"

#include "hsp/config.hpp"
#include "hsp/convex_hull.hpp"
#include "hsp/error.hpp"
#include "hsp/kdtree.hpp"
#include "hsp/mesh_io.hpp"
#include "hsp/partition.hpp"
#include "hsp/projection.hpp"
#include "hsp/remesh.hpp"
#include "hsp/sampling.hpp"
#include "hsp/seed.hpp"
#include "hsp/topology.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <set>

namespace hsp {

namespace fs = std::filesystem;

PipelineConfig full_preset() {
  PipelineConfig c;
  c.prior3d.steps = 2000;
  c.prior2d_xyz.steps = 4000;
  c.prior2d_rgb.steps = 2000;
  c.prior2d_xyz.resolution = c.prior2d_rgb.resolution = c.atlas_resolution = 1024;
  return c;
}

PipelineConfig desk_preset() {
  PipelineConfig c = full_preset();
  c.prior3d.steps = 500;
  c.prior2d_xyz.steps = 1000;
  c.prior2d_rgb.steps = 500;
  // Narrower networks, smaller meshes and maps so a run fits a single CPU core.
  c.prior3d.blocks = {{6, 16}, {16, 32}, {32, 32}, {32, 32}, {32, 16}, {16, 6}};
  c.initial_vertices = 1000;
  c.refinement_vertex_schedule = {1500, 2000, 2500};
  c.atlas_resolution = 128;
  for (Prior2DConfig* p : {&c.prior2d_xyz, &c.prior2d_rgb}) {
    p->resolution = c.atlas_resolution;
    p->down_channels = 16;
    p->up_channels = 16;
  }
  return c;
}

PipelineConfig preset_by_name(const std::string& name) {
  if (name == "full") return full_preset();
  if (name == "desk") return desk_preset();
  throw ParameterError("unknown preset '" + name + "' (expected desk or full)");
}

void validate(const PipelineConfig& c) {
  if (c.iterations < 1) throw ParameterError("iterations must be >= 1");
  if (c.initial_vertices < 4) throw ParameterError("initial_vertices must be >= 4");
  if (c.max_part_faces < 100) throw ParameterError("max_part_faces must be >= 100");
  if (static_cast<int>(c.refinement_vertex_schedule.size()) < c.iterations) {
    throw ParameterError("refinement_vertex_schedule needs one entry per iteration");
  }
  int prev = c.initial_vertices;
  for (int v : c.refinement_vertex_schedule) {
    if (v < prev) throw ParameterError("refinement_vertex_schedule must be non-decreasing");
    prev = v;
  }
  if (c.prior3d.steps < 1 || !(c.prior3d.learning_rate > 0)) throw ParameterError("invalid prior3d settings");
  for (const Prior2DConfig* p : {&c.prior2d_xyz, &c.prior2d_rgb}) {
    validate(*p);
    if (p->resolution != c.atlas_resolution) {
      throw ParameterError("2D prior resolution must equal atlas_resolution");
    }
  }
}

// --- evaluation ------------------------------------------------------------

Normalization evaluation_frame(const TriangleMesh& gt, double span) {
  const BoundingBox box = bounding_box(gt.vertices);
  Normalization n;
  n.center = 0.5 * (box.min + box.max);
  n.scale = span / box.longest();
  return n;
}

MetricReport evaluate(const TriangleMesh& pred, const TriangleMesh& gt, const EvaluationConfig& config) {
  if (!mesh_violations(gt).empty()) throw ParameterError("evaluate: invalid ground-truth mesh");
  const Normalization f100 = evaluation_frame(gt, 100.0), f1 = evaluation_frame(gt, 1.0);
  const TriangleMesh pred1 = transformed(pred, f1), gt1 = transformed(gt, f1);
  const auto ps = sample_with_normals(pred1, config.samples, config.seed);
  const auto gs = sample_with_normals(gt1, config.samples, config.seed);
  std::vector<Vec3> pp(ps.size()), gp(gs.size());
  for (std::size_t i = 0; i < ps.size(); ++i) pp[i] = ps[i].position;
  for (std::size_t i = 0; i < gs.size(); ++i) gp[i] = gs[i].position;

  MetricReport r;
  {
    // Same samples expressed in the span-100 frame.
    const double k = f100.scale / f1.scale;
    std::vector<Vec3> pp100(pp.size()), gp100(gp.size());
    for (std::size_t i = 0; i < pp.size(); ++i) pp100[i] = pp[i] * k;
    for (std::size_t i = 0; i < gp.size(); ++i) gp100[i] = gp[i] * k;
    r.f_score = f_score_surface(transformed(pred, f100), pp100, transformed(gt, f100), gp100, config.threshold);
  }
  r.chamfer = chamfer_metric(pp, gp);
  r.emd = emd_metric(subsample(pp, config.emd_points, mix_seed(config.seed, 1)),
                     subsample(gp, config.emd_points, mix_seed(config.seed, 1)));
  r.normal_consistency = normal_consistency(ps, gs);
  return r;
}

PointCloud synthesize_input(const TriangleMesh& gt, int n_points, double noise_fraction, std::uint64_t seed,
                            bool with_colors) {
  if (with_colors) throw ParameterError("colors requested but the ground-truth mesh has no texture");
  if (n_points < 4) throw ParameterError("synthesize_input needs n_points >= 4");
  if (noise_fraction < 0) throw ParameterError("noise fraction must be >= 0");
  const auto samples = sample_surface(gt, n_points, seed);
  const Vec3 extent = bounding_box(gt.vertices).extent();
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  PointCloud cloud;
  cloud.positions.reserve(samples.size());
  for (const SurfacePoint& s : samples) {
    Vec3 p = s.position;
    if (noise_fraction > 0) {
      for (int k = 0; k < 3; ++k) p[k] += noise_fraction * extent[k] * normal(rng);
    }
    cloud.positions.push_back(p);
  }
  return cloud;
}

PointCloud synthesize_input(const TexturedMesh& gt, int n_points, double noise_fraction, std::uint64_t seed) {
  PointCloud cloud = synthesize_input(gt.mesh, n_points, noise_fraction, seed, false);
  const auto samples = sample_surface(gt.mesh, n_points, seed);
  cloud.colors.emplace();
  cloud.colors->reserve(samples.size());
  for (const SurfacePoint& s : samples) {
    const auto& c = gt.atlas.corner_uv[s.face_id];
    const Vec2 uv = s.barycentric[0] * c[0] + s.barycentric[1] * c[1] + s.barycentric[2] * c[2];
    cloud.colors->push_back(gt.color_at(uv));
  }
  return cloud;
}

namespace {

// Segment pq against triangle abc (Moller-Trumbore), excluding endpoints touching.
bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 d = q - p, e1 = b - a, e2 = c - a;
  const Vec3 h = d.cross(e2);
  const double det = e1.dot(h);
  const double scale = e1.norm() * e2.norm() * d.norm();
  if (std::abs(det) <= 1e-12 * scale) return false;
  const double inv = 1.0 / det;
  const Vec3 s = p - a;
  const double u = inv * s.dot(h);
  if (u < 0 || u > 1) return false;
  const Vec3 qv = s.cross(e1);
  const double v = inv * d.dot(qv);
  if (v < 0 || u + v > 1) return false;
  const double t = inv * e2.dot(qv);
  return t > 0 && t < 1;
}

}  // namespace

int count_self_intersections(const TriangleMesh& mesh) {
  const FaceBvh bvh(mesh);
  int count = 0;
  std::vector<int> cand;
  for (int f = 0; f < mesh.num_faces(); ++f) {
    const Face& t = mesh.faces[f];
    Vec3 lo = mesh.vertices[t[0]], hi = lo;
    for (int v : t) {
      lo = lo.cwiseMin(mesh.vertices[v]);
      hi = hi.cwiseMax(mesh.vertices[v]);
    }
    cand.clear();
    bvh.query_box(lo, hi, cand);
    for (int g : cand) {
      if (g <= f) continue;
      const Face& u = mesh.faces[g];
      bool shares = false;
      for (int a : t) {
        for (int b : u) shares = shares || a == b;
      }
      if (shares) continue;
      const auto& V = mesh.vertices;
      bool hit = false;
      for (int k = 0; k < 3 && !hit; ++k) {
        hit = segment_hits_triangle(V[t[k]], V[t[(k + 1) % 3]], V[u[0]], V[u[1]], V[u[2]]) ||
              segment_hits_triangle(V[u[k]], V[u[(k + 1) % 3]], V[t[0]], V[t[1]], V[t[2]]);
      }
      count += hit ? 1 : 0;
    }
  }
  return count;
}

double edge_length_stddev(const TriangleMesh& mesh) {
  const auto len = edge_lengths(mesh);
  if (len.empty()) return 0.0;
  double mean = 0.0;
  for (double l : len) mean += l;
  mean /= len.size();
  double var = 0.0;
  for (double l : len) var += (l - mean) * (l - mean);
  return std::sqrt(var / len.size());
}

// --- partitioned 3D prior -------------------------------------------------

Prior3DResult optimize_3d_partitioned(const TriangleMesh& mesh, const std::vector<Vec3>& cloud,
                                      const Prior3DConfig& config, int max_part_faces, int overlap_rings,
                                      int* parts_out) {
  if (mesh.num_faces() <= max_part_faces) {
    if (parts_out) *parts_out = 1;
    return optimize_3d_prior(mesh, cloud, config);
  }
  const MeshPartition partition = partition_mesh(mesh, max_part_faces, overlap_rings);
  if (parts_out) *parts_out = static_cast<int>(partition.parts.size());
  // Each point supervises the parts that contain the face it projects onto.
  const FaceBvh bvh(mesh);
  std::vector<int> point_face(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) point_face[i] = bvh.closest(cloud[i]).face_id;

  Prior3DResult result;
  std::vector<std::vector<Vec3>> per_part;
  for (std::size_t k = 0; k < partition.parts.size(); ++k) {
    const MeshPart& part = partition.parts[k];
    std::vector<char> in_part(mesh.num_faces(), 0);
    for (int f : part.face_map) in_part[f] = 1;
    std::vector<Vec3> sub;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      if (in_part[point_face[i]]) sub.push_back(cloud[i]);
    }
    if (sub.size() < 4) {
      per_part.push_back(part.mesh.vertices);
      continue;
    }
    Prior3DConfig pc = config;
    pc.seed = mix_seed(config.seed, 500 + k);
    Prior3DResult r = optimize_3d_prior_region(part.mesh, sub, pc);
    for (const Prior3DLogEntry& e : r.log) result.log.push_back(e);
    per_part.push_back(std::move(r.mesh.vertices));
  }
  result.mesh = mesh;
  result.mesh.vertices = merge_partitions(partition, per_part);
  return result;
}

// --- reconstruction -------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

std::string cloud_hash(const PointCloud& cloud) {
  std::string bytes;
  for (const Vec3& p : cloud.positions) bytes.append(reinterpret_cast<const char*>(p.data()), 3 * sizeof(double));
  if (cloud.has_colors()) {
    for (const Vec3& c : *cloud.colors) bytes.append(reinterpret_cast<const char*>(c.data()), 3 * sizeof(double));
  }
  return fnv1a_hex(bytes);
}

std::vector<double> map_to_hwc(const DenseUVMap& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.height()) * m.width() * 3);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      for (int k = 0; k < 3; ++k) out.push_back(m.map.at(r, c, k));
    }
  }
  return out;
}

Json stage_to_json(const StageReport& s) {
  Json j;
  j["index"] = s.index;
  j["name"] = s.name;
  j["seed"] = s.seed;
  j["seconds"] = s.seconds;
  j["vertices"] = s.vertices;
  j["faces"] = s.faces;
  j["parts"] = s.parts;
  j["dropped_points"] = s.dropped_points;
  j["fallback_vertices"] = s.fallback_vertices;
  j["displacement_rms"] = s.displacement_rms;
  j["early_stop"] = s.early_stop;
  if (s.metrics) j["metrics"] = s.metrics->to_record();
  return j;
}

StageReport stage_from_json(const Json& j) {
  StageReport s;
  s.index = j.at("index");
  s.name = j.at("name");
  s.seed = j.at("seed");
  s.seconds = j.at("seconds");
  s.vertices = j.at("vertices");
  s.faces = j.at("faces");
  s.parts = j.at("parts");
  s.dropped_points = j.at("dropped_points");
  s.fallback_vertices = j.at("fallback_vertices");
  s.displacement_rms = j.at("displacement_rms");
  s.early_stop = j.at("early_stop");
  if (j.contains("metrics")) s.metrics = MetricReport::from_record(j.at("metrics").get<std::string>());
  return s;
}

class Checkpointer {
public:
  Checkpointer(std::string dir, Json header) : dir_(std::move(dir)), manifest_(std::move(header)) {
    manifest_["stages"] = Json::array();
  }

  bool enabled() const { return !dir_.empty(); }
  std::string stage_dir(int k) const { return (fs::path(dir_) / ("stage_" + std::to_string(k))).string(); }
  const std::string& last() const { return last_; }

  std::string prepare(int k) const {
    const std::string d = stage_dir(k);
    fs::create_directories(d);
    return d;
  }

  void commit(const StageReport& s) {
    if (!enabled()) return;
    manifest_["stages"].push_back(stage_to_json(s));
    write_text_atomic((fs::path(dir_) / "manifest.json").string(), manifest_.dump(2) + "\n");
    last_ = stage_dir(s.index);
  }

  // Stages recorded by an earlier run with the same header.
  std::vector<StageReport> load_completed(const Json& header) {
    const fs::path path = fs::path(dir_) / "manifest.json";
    if (!fs::exists(path)) return {};
    const Json old = Json::parse(read_text(path.string()));
    for (const char* key : {"config_hash", "input_hash", "seed"}) {
      if (old.at(key) != header.at(key)) {
        throw ParameterError(std::string("cannot resume from ") + dir_ + ": " + key + " differs from this run");
      }
    }
    std::vector<StageReport> out;
    for (const Json& s : old.at("stages")) {
      out.push_back(stage_from_json(s));
      manifest_["stages"].push_back(s);
      last_ = stage_dir(out.back().index);
    }
    return out;
  }

private:
  std::string dir_;
  Json manifest_;
  std::string last_;
};

double rms_displacement(const TriangleMesh& a, const TriangleMesh& b) {
  if (a.vertices.size() != b.vertices.size() || a.vertices.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) s += (a.vertices[i] - b.vertices[i]).squaredNorm();
  return std::sqrt(s / a.vertices.size());
}

}  // namespace

ReconstructionResult reconstruct(const PointCloud& input, const PipelineConfig& config,
                                 const ReconstructOptions& options) {
  validate(config);
  validate(input);
  if (config.texture && !input.has_colors()) {
    throw ParameterError("texture requested but the point cloud has no colors");
  }
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  ReconstructionResult result;
  result.normalization = normalization_for(input.positions);
  const PointCloud cloud = normalized(input, result.normalization);

  Json header;
  header["config_hash"] = config_hash(config);
  header["input_hash"] = cloud_hash(input);
  header["seed"] = config.seed;
  header["normalization"] = {{"center", {result.normalization.center.x(), result.normalization.center.y(),
                                         result.normalization.center.z()}},
                             {"scale", result.normalization.scale}};
  header["config"] = to_json(config);
  Checkpointer ckpt(config.checkpoint_dir, header);
  if (ckpt.enabled()) fs::create_directories(config.checkpoint_dir);

  std::vector<StageReport> done;
  if (options.resume) {
    if (!ckpt.enabled()) throw ParameterError("resume requested without a checkpoint directory");
    done = ckpt.load_completed(header);
    log("resuming after " + std::to_string(done.size()) + " completed stages");
  }

  const int texture_stage = config.iterations + 1;
  TriangleMesh mesh;
  int stages_run = 0;
  bool stopped_early = false;

  auto stage_seed = [&](int k) { return mix_seed(config.seed, 100 + static_cast<std::uint64_t>(k)); };
  auto record_metrics = [&](StageReport& s) {
    if (!options.reference) return;
    s.metrics = evaluate(untransformed(mesh, result.normalization), *options.reference, options.evaluation);
  };
  auto finish_stage = [&](StageReport& s, Clock::time_point t0) {
    s.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    s.vertices = mesh.num_vertices();
    s.faces = mesh.num_faces();
    ckpt.commit(s);
    result.stages.push_back(s);
    if (s.metrics) result.per_stage_metrics.push_back(*s.metrics);
    ++stages_run;
    log("stage " + std::to_string(s.index) + " (" + s.name + ") done in " + std::to_string(s.seconds) + " s, " +
        std::to_string(s.vertices) + " vertices");
  };
  auto interrupted = [&]() { return options.stop_after_stages >= 0 && stages_run >= options.stop_after_stages; };
  auto wrap = [&](const std::string& stage, auto&& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what(), ckpt.last());
    }
  };
  auto write_loss_log = [&](const std::string& dir, const std::string& text) {
    if (ckpt.enabled()) write_text_atomic((fs::path(dir) / "loss.log").string(), text);
  };

  // Replay completed stages.
  std::size_t next = 0;
  for (; next < done.size(); ++next) {
    const StageReport& s = done[next];
    if (s.index == texture_stage) break;
    result.stages.push_back(s);
    if (s.metrics) result.per_stage_metrics.push_back(*s.metrics);
    stopped_early = stopped_early || s.early_stop;
  }
  if (next > 0) mesh = read_obj((fs::path(ckpt.stage_dir(done[next - 1].index)) / "mesh.obj").string()).mesh;

  // Stage 0: hull, remesh, 3D prior.
  if (next == 0) {
    StageReport s;
    s.index = 0;
    s.name = "init3d";
    s.seed = stage_seed(0);
    const auto t0 = Clock::now();
    wrap(s.name, [&] {
      log("stage 0: convex hull of " + std::to_string(cloud.size()) + " points");
      const TriangleMesh hull = convex_hull(cloud.positions);
      const TriangleMesh start = remesh_to_resolution(hull, config.initial_vertices);
      Prior3DConfig pc = config.prior3d;
      pc.seed = s.seed;
      const Prior3DResult r = optimize_3d_partitioned(start, cloud.positions, pc, config.max_part_faces,
                                                      config.partition_overlap_rings, &s.parts);
      mesh = r.mesh;
      if (ckpt.enabled()) {
        const std::string d = ckpt.prepare(0);
        write_obj((fs::path(d) / "mesh.obj").string(), mesh);
        write_loss_log(d, format_loss_log(r.log));
      }
      record_metrics(s);
    });
    finish_stage(s, t0);
    if (interrupted()) return result;
  }

  // Refinement iterations.
  for (int it = 1; it <= config.iterations && !stopped_early; ++it) {
    if (static_cast<std::size_t>(it) < next) continue;
    StageReport s;
    s.index = it;
    s.name = "iter" + std::to_string(it);
    s.seed = stage_seed(it);
    const auto t0 = Clock::now();
    wrap(s.name, [&] {
      const TriangleMesh remeshed = remesh_to_resolution(mesh, config.refinement_vertex_schedule[it - 1]);
      const UVAtlas atlas = generate_atlas(remeshed, config.atlas_resolution);
      const FaceBvh bvh(remeshed);
      const SparseUVSamples sparse = splat_points_to_uv(remeshed, atlas, cloud, ChannelKind::XYZ, &bvh);
      s.dropped_points = sparse.dropped;
      Prior2DConfig c2 = config.prior2d_xyz;
      c2.seed = mix_seed(s.seed, 1);
      const Prior2DResult dense = optimize_2d_prior(sparse, c2);
      const VertexUpdate updated = update_vertices_from_map(remeshed, atlas, dense.map);
      s.fallback_vertices = updated.fallback_vertices;
      Prior3DConfig pc = config.prior3d;
      pc.seed = mix_seed(s.seed, 2);
      const Prior3DResult r = optimize_3d_partitioned(updated.mesh, cloud.positions, pc, config.max_part_faces,
                                                      config.partition_overlap_rings, &s.parts);
      s.displacement_rms = rms_displacement(remeshed, r.mesh);
      s.early_stop = config.early_stop_rms > 0 && s.displacement_rms < config.early_stop_rms;
      mesh = r.mesh;
      if (ckpt.enabled()) {
        const std::string d = ckpt.prepare(it);
        write_obj((fs::path(d) / "mesh.obj").string(), mesh);
        export_atlas_obj((fs::path(d) / "atlas.obj").string(), remeshed, atlas);
        write_png((fs::path(d) / "sparse_xyz.png").string(), sparse_map_image(sparse));
        write_npy((fs::path(d) / "dense_xyz.npy").string(),
                  {static_cast<std::size_t>(dense.map.height()), static_cast<std::size_t>(dense.map.width()), 3},
                  map_to_hwc(dense.map));
        write_loss_log(d, "# 2d xyz: step mse\n" + format_loss_log(dense.log) +
                              "# 3d: step chamfer edge total\n" + format_loss_log(r.log));
      }
      record_metrics(s);
    });
    finish_stage(s, t0);
    stopped_early = s.early_stop;
    if (interrupted()) return result;
  }

  // Texture stage (always recomputed on resume; it never changes the mesh).
  {
    StageReport s;
    s.index = texture_stage;
    s.name = "texture";
    s.seed = stage_seed(texture_stage);
    const auto t0 = Clock::now();
    wrap(s.name, [&] {
      result.atlas = generate_atlas(mesh, config.atlas_resolution);
      std::string d;
      if (ckpt.enabled()) {
        d = ckpt.prepare(texture_stage);
        export_atlas_obj((fs::path(d) / "atlas.obj").string(), mesh, result.atlas);
        write_obj((fs::path(d) / "mesh.obj").string(), mesh);
      }
      if (config.texture) {
        const SparseUVSamples sparse = splat_points_to_uv(mesh, result.atlas, cloud, ChannelKind::RGB);
        s.dropped_points = sparse.dropped;
        Prior2DConfig c2 = config.prior2d_rgb;
        c2.seed = mix_seed(s.seed, 1);
        const Prior2DResult dense = optimize_2d_prior(sparse, c2);
        result.texture = bake_texture(result.atlas, dense.map);
        if (ckpt.enabled()) {
          write_png((fs::path(d) / "sparse_rgb.png").string(), sparse_map_image(sparse));
          write_npy((fs::path(d) / "dense_rgb.npy").string(),
                    {static_cast<std::size_t>(dense.map.height()), static_cast<std::size_t>(dense.map.width()), 3},
                    map_to_hwc(dense.map));
          write_png((fs::path(d) / "texture.png").string(), result.texture);
          write_loss_log(d, "# 2d rgb: step mse\n" + format_loss_log(dense.log));
        }
      }
    });
    finish_stage(s, t0);
  }
  result.mesh = untransformed(mesh, result.normalization);
  return result;
}

void write_textured_obj(const std::string& dir, const ReconstructionResult& result) {
  fs::create_directories(dir);
  const bool textured = result.texture.width > 0;
  export_atlas_obj((fs::path(dir) / "mesh.obj").string(), result.mesh, result.atlas,
                   textured ? "material.mtl" : "", textured ? "textured" : "");
  if (textured) {
    write_mtl((fs::path(dir) / "material.mtl").string(), "textured", "texture.png");
    // OBJ texture coordinates put v = 0 at the bottom row of the image.
    const std::string png = (fs::path(dir) / "texture.png").string();
    write_png(png + ".tmp.png", flipped_vertically(result.texture));
    fs::rename(png + ".tmp.png", png);
  }
}

}  // namespace hsp
