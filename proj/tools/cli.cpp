#include "cli.hpp"

#include "hsp/config.hpp"
#include "hsp/error.hpp"
#include "hsp/mesh_io.hpp"
#include "hsp/pipeline.hpp"
#include "hsp/shapes.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>

namespace hsp {

namespace {

namespace fs = std::filesystem;

constexpr double kPi = 3.14159265358979323846;

struct ConfigArgs {
  std::string config_path;
  std::string preset;
  std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--preset", args.preset, "Base preset")->check(CLI::IsMember({"desk", "full"}));
  cmd->add_option("--set", args.sets, "Override a key: dotted.path=json_value (repeatable)");
}

// Precedence: preset < config file < HSP_* environment < --set < dedicated flags.
RunConfig resolve_config(const ConfigArgs& args, char** environment) {
  Json j = args.config_path.empty() ? Json::object() : Json::parse(read_text(args.config_path));
  if (!args.preset.empty()) j["preset"] = args.preset;
  RunConfig rc = run_config_from_json(j);
  apply_env_overrides(rc, environment);
  for (const std::string& s : args.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + s + "'");
    std::string key = s.substr(0, eq);
    Json value = Json::parse(s.substr(eq + 1), nullptr, false);
    if (value.is_discarded()) value = s.substr(eq + 1);
    Json patch = value;
    for (auto dot = key.rfind('.'); dot != std::string::npos; dot = key.rfind('.')) {
      patch = Json{{key.substr(dot + 1), patch}};
      key.resize(dot);
    }
    if (key == "pipeline") {
      apply_json(rc.pipeline, patch, "pipeline");
    } else if (key == "evaluation") {
      apply_json(rc.evaluation, patch, "evaluation");
    } else {
      throw ParameterError("unknown config key '" + s.substr(0, eq) + "'");
    }
  }
  return rc;
}

TexturedMesh builtin_shape(const std::string& name) {
  if (name == "sphere") return textured_sphere(5, 256);
  if (name == "cube") return textured_cube(4, 256);
  if (name == "torus") {
    return paint_mesh(torus(0.35, 0.15, 64, 32), 256, [](int, const Vec3& p) {
      const double a = std::atan2(p.y(), p.x());
      return Vec3(0.5 + 0.4 * std::cos(a), 0.5 + 0.4 * std::sin(a), 0.5 + 0.4 * std::sin(3.0 * a) * (p.z() > 0 ? 1 : -1));
    });
  }
  throw ParameterError("unknown shape '" + name + "' (expected sphere, cube or torus)");
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

struct Row {
  std::string name;
  MetricReport m;
};

std::string table(const std::vector<Row>& rows) {
  std::vector<std::vector<std::string>> cells{{"name", "F-score", "CD", "EMD", "NC"}};
  for (const Row& r : rows) {
    cells.push_back({r.name, fmt(r.m.f_score, 3), fmt(r.m.chamfer, 6), fmt(r.m.emd, 6), fmt(r.m.normal_consistency, 4)});
  }
  std::vector<std::size_t> width(5, 0);
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      const std::string pad(width[k] - row[k].size(), ' ');
      out += k == 0 ? row[k] + pad : "  " + pad + row[k];
    }
    out += "\n";
  }
  return out;
}

int cmd_config(const ConfigArgs& args, char** environment, std::ostream& out) {
  const RunConfig rc = resolve_config(args, environment);
  Json j = to_json(rc);
  j["config_hash"] = config_hash(rc.pipeline);
  out << j.dump(2) << "\n";
  return 0;
}

struct SynthArgs {
  std::string shape = "sphere";
  std::string mesh;
  int points = 25000;
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::string out;
  std::string gt_out;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  PointCloud cloud;
  Json record;
  if (!a.mesh.empty()) {
    const TriangleMesh gt = read_mesh(a.mesh);
    cloud = synthesize_input(gt, a.points, a.noise, a.seed, false);
    record["source"] = a.mesh;
    if (!a.gt_out.empty()) write_obj(a.gt_out, gt);
  } else {
    const TexturedMesh gt = builtin_shape(a.shape);
    cloud = synthesize_input(gt, a.points, a.noise, a.seed);
    record["source"] = "builtin:" + a.shape;
    if (!a.gt_out.empty()) write_obj(a.gt_out, gt.mesh);
  }
  write_ply_cloud(a.out, cloud);
  record["n_points"] = cloud.size();
  record["noise"] = a.noise;
  record["seed"] = a.seed;
  record["colors"] = cloud.has_colors();
  record["output"] = a.out;
  if (!a.gt_out.empty()) record["ground_truth"] = a.gt_out;
  write_text_atomic(a.out + ".json", record.dump(2) + "\n");
  out << "wrote " << cloud.size() << " points to " << a.out << "\n";
  return 0;
}

struct ReconstructArgs {
  ConfigArgs config;
  std::string input;
  std::string out;
  std::int64_t seed = -1;
  bool resume = false;
  std::string resume_dir;
  bool no_texture = false;
  std::string reference;
  int stop_after = -1;
  bool quiet = false;
};

int cmd_reconstruct(const ReconstructArgs& a, char** environment, std::ostream& out) {
  RunConfig rc = resolve_config(a.config, environment);
  if (!a.input.empty()) rc.input = a.input;
  if (!a.out.empty()) rc.output = a.out;
  if (a.seed >= 0) rc.pipeline.seed = static_cast<std::uint64_t>(a.seed);
  if (a.no_texture) rc.pipeline.texture = false;
  if (rc.input.empty()) throw ParameterError("no input point cloud (use --input)");
  if (rc.output.empty()) throw ParameterError("no output directory (use --out)");
  if (!a.resume_dir.empty()) rc.pipeline.checkpoint_dir = a.resume_dir;
  if (rc.pipeline.checkpoint_dir.empty()) rc.pipeline.checkpoint_dir = (fs::path(rc.output) / "checkpoints").string();

  PointCloud cloud;
  try {
    cloud = read_ply_cloud(rc.input);
  } catch (const Error& e) {
    throw StageError("input", e.what(), "");
  }
  std::optional<TriangleMesh> reference;
  if (!a.reference.empty()) reference = read_mesh(a.reference);

  ReconstructOptions opts;
  opts.resume = a.resume || !a.resume_dir.empty();
  opts.evaluation = rc.evaluation;
  opts.stop_after_stages = a.stop_after;
  if (reference) opts.reference = &*reference;
  if (!a.quiet) opts.log = [&](const std::string& msg) { out << msg << std::endl; };

  fs::create_directories(rc.output);
  write_text_atomic((fs::path(rc.output) / "config.json").string(), to_json(rc).dump(2) + "\n");
  const ReconstructionResult result = reconstruct(cloud, rc.pipeline, opts);

  Json manifest;
  manifest["config_hash"] = config_hash(rc.pipeline);
  manifest["seed"] = rc.pipeline.seed;
  manifest["input"] = rc.input;
  manifest["input_points"] = cloud.size();
  manifest["config"] = to_json(rc);
  manifest["checkpoint_dir"] = rc.pipeline.checkpoint_dir;
  Json stages = Json::array();
  for (const StageReport& s : result.stages) {
    Json j{{"index", s.index},       {"name", s.name},   {"seed", s.seed},   {"seconds", s.seconds},
           {"vertices", s.vertices}, {"faces", s.faces}, {"parts", s.parts}, {"dropped_points", s.dropped_points},
           {"fallback_vertices", s.fallback_vertices},   {"displacement_rms", s.displacement_rms}};
    if (s.metrics) {
      j["metrics"] = {{"f_score", s.metrics->f_score},
                      {"chamfer", s.metrics->chamfer},
                      {"emd", s.metrics->emd},
                      {"normal_consistency", s.metrics->normal_consistency}};
    }
    stages.push_back(j);
  }
  manifest["stages"] = stages;
  const bool complete = !result.stages.empty() && result.stages.back().name == "texture";
  manifest["complete"] = complete;
  if (complete) {
    write_textured_obj(rc.output, result);
    manifest["outputs"] = result.texture.width > 0 ? Json{"mesh.obj", "material.mtl", "texture.png"} : Json{"mesh.obj"};
  }
  write_text_atomic((fs::path(rc.output) / "manifest.json").string(), manifest.dump(2) + "\n");
  out << (complete ? "wrote " + (fs::path(rc.output) / "mesh.obj").string()
                   : "stopped after " + std::to_string(result.stages.size()) + " stages; resume with --resume")
      << "\n";
  return 0;
}

struct EvaluateArgs {
  ConfigArgs config;
  std::vector<std::string> pred;
  std::vector<std::string> gt;
  std::vector<std::string> names;
  int samples = -1;
  double threshold = -1;
  std::string csv;
};

int cmd_evaluate(const EvaluateArgs& a, char** environment, std::ostream& out) {
  const RunConfig rc = resolve_config(a.config, environment);
  EvaluationConfig ec = rc.evaluation;
  if (a.samples > 0) ec.samples = a.samples;
  if (a.threshold > 0) ec.threshold = a.threshold;
  if (a.gt.size() != 1 && a.gt.size() != a.pred.size()) {
    throw ParameterError("give one --gt for all predictions or one per --pred");
  }
  if (!a.names.empty() && a.names.size() != a.pred.size()) throw ParameterError("--name count must match --pred");

  std::vector<Row> rows;
  MetricReport mean;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    const TriangleMesh pred = read_mesh(a.pred[i]);
    const TriangleMesh gt = read_mesh(a.gt.size() == 1 ? a.gt[0] : a.gt[i]);
    const Row r{a.names.empty() ? a.pred[i] : a.names[i], evaluate(pred, gt, ec)};
    mean.f_score += r.m.f_score;
    mean.chamfer += r.m.chamfer;
    mean.emd += r.m.emd;
    mean.normal_consistency += r.m.normal_consistency;
    rows.push_back(r);
  }
  const double n = static_cast<double>(rows.size());
  mean.f_score /= n;
  mean.chamfer /= n;
  mean.emd /= n;
  mean.normal_consistency /= n;
  rows.push_back({"mean", mean});

  out << "# samples=" << ec.samples << " threshold=" << ec.threshold << " emd_points=" << ec.emd_points
      << " seed=" << ec.seed << "\n";
  out << table(rows);
  if (!a.csv.empty()) {
    std::string csv = "# samples=" + std::to_string(ec.samples) + " threshold=" + fmt(ec.threshold, 6) +
                      " emd_points=" + std::to_string(ec.emd_points) + " seed=" + std::to_string(ec.seed) + "\n";
    csv += "name,f_score,chamfer,emd,normal_consistency\n";
    char buf[256];
    for (const Row& r : rows) {
      std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g,%.10g\n", r.m.f_score, r.m.chamfer, r.m.emd,
                    r.m.normal_consistency);
      csv += r.name + buf;
    }
    write_text_atomic(a.csv, csv);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, char** environment, std::ostream& out, std::ostream& err) {
  CLI::App app{"Surface reconstruction and texturing from point clouds with self-prior networks", "hsp"};
  app.require_subcommand(1);

  ConfigArgs cfg_args;
  CLI::App* cfg = app.add_subcommand("config", "Print the resolved configuration as JSON");
  add_config_options(cfg, cfg_args);

  SynthArgs synth;
  CLI::App* sy = app.add_subcommand("synth", "Sample a (noisy, colored) point cloud from a ground-truth shape");
  auto* shape_opt = sy->add_option("--shape", synth.shape, "Built-in textured shape")
                        ->check(CLI::IsMember({"sphere", "cube", "torus"}));
  sy->add_option("--mesh", synth.mesh, "Ground-truth mesh (.obj/.ply) instead of a built-in shape")->excludes(shape_opt);
  sy->add_option("--points", synth.points, "Number of points")->check(CLI::PositiveNumber);
  sy->add_option("--noise", synth.noise, "Noise std as a fraction of the per-axis extent")->check(CLI::NonNegativeNumber);
  sy->add_option("--seed", synth.seed, "Sampling seed");
  sy->add_option("--out", synth.out, "Output PLY")->required();
  sy->add_option("--gt-out", synth.gt_out, "Also write the ground-truth mesh as OBJ");

  ReconstructArgs rec;
  CLI::App* rc = app.add_subcommand("reconstruct", "Reconstruct a textured mesh from a PLY point cloud");
  add_config_options(rc, rec.config);
  rc->add_option("--input", rec.input, "Input PLY");
  rc->add_option("--out", rec.out, "Output directory");
  rc->add_option("--seed", rec.seed, "Pipeline seed")->check(CLI::NonNegativeNumber);
  auto* resume = rc->add_option("--resume", rec.resume_dir, "Resume from a checkpoint directory (default <out>/checkpoints)")
                     ->expected(0, 1);
  rc->add_flag("--no-texture", rec.no_texture, "Skip the texture stage");
  rc->add_option("--reference", rec.reference, "Ground-truth mesh for per-stage metrics");
  rc->add_option("--stop-after", rec.stop_after, "Stop after this many stages (for testing resume)");
  rc->add_flag("--quiet", rec.quiet, "No progress output");

  EvaluateArgs ev;
  CLI::App* e = app.add_subcommand("evaluate", "Compare predicted meshes with ground truth");
  add_config_options(e, ev.config);
  e->add_option("--pred", ev.pred, "Predicted mesh (repeatable)")->required();
  e->add_option("--gt", ev.gt, "Ground-truth mesh (one, or one per --pred)")->required();
  e->add_option("--name", ev.names, "Row names (one per --pred)");
  e->add_option("--samples", ev.samples, "Surface samples per mesh")->check(CLI::PositiveNumber);
  e->add_option("--threshold", ev.threshold, "F-score threshold in the span-100 frame")->check(CLI::PositiveNumber);
  e->add_option("--csv", ev.csv, "Also write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    return app.exit(pe, out, err);
  }

  try {
    if (*cfg) return cmd_config(cfg_args, environment, out);
    if (*sy) return cmd_synth(synth, out);
    if (*rc) {
      rec.resume = resume->count() > 0;
      return cmd_reconstruct(rec, environment, out);
    }
    if (*e) return cmd_evaluate(ev, environment, out);
  } catch (const StageError& se) {
    err << "error: stage " << se.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& je) {
    err << "error: invalid JSON: " << je.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace hsp
