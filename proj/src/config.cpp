#include "hsp/config.hpp"

#include "hsp/error.hpp"
#include "hsp/mesh_io.hpp"

#include <cctype>
#include <cstdio>
#include <cstring>

namespace hsp {

namespace {

Json to_json(const Prior3DConfig& c) {
  Json blocks = Json::array();
  for (const ResidualBlockSpec& b : c.blocks) blocks.push_back({b.in_channels, b.out_channels});
  return {{"blocks", blocks},
          {"convs_per_block", c.convs_per_block},
          {"pool_after", c.pool_after},
          {"pool_proportions", c.pool_proportions},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"lambda_chamfer", c.weights.lambda0},
          {"lambda_edge", c.weights.lambda1},
          {"samples_per_step", c.samples_per_step},
          {"max_samples_per_step", c.max_samples_per_step},
          {"mean_normalized_loss", c.mean_normalized_loss},
          {"output_init_scale", c.output_init_scale}};
}

Json to_json(const Prior2DConfig& c) {
  return {{"input_channels", c.input_channels}, {"resolution", c.resolution}, {"z_std", c.z_std},
          {"eps_std", c.eps_std},               {"steps", c.steps},           {"learning_rate", c.learning_rate},
          {"levels", c.levels},                 {"down_channels", c.down_channels},
          {"up_channels", c.up_channels},       {"skip_channels", c.skip_channels},
          {"leaky_slope", c.leaky_slope}};
}

void from_json(const Json& j, Prior3DConfig& c) {
  c.blocks.clear();
  for (const Json& b : j.at("blocks")) {
    if (!b.is_array() || b.size() != 2) throw ParameterError("prior3d.blocks entries must be [in, out] pairs");
    c.blocks.push_back({b[0].get<int>(), b[1].get<int>()});
  }
  c.convs_per_block = j.at("convs_per_block");
  c.pool_after = j.at("pool_after").get<std::vector<int>>();
  c.pool_proportions = j.at("pool_proportions").get<std::vector<double>>();
  c.steps = j.at("steps");
  c.learning_rate = j.at("learning_rate");
  c.weights.lambda0 = j.at("lambda_chamfer");
  c.weights.lambda1 = j.at("lambda_edge");
  c.samples_per_step = j.at("samples_per_step");
  c.max_samples_per_step = j.at("max_samples_per_step");
  c.mean_normalized_loss = j.at("mean_normalized_loss");
  c.output_init_scale = j.at("output_init_scale");
}

void from_json(const Json& j, Prior2DConfig& c) {
  c.input_channels = j.at("input_channels");
  c.resolution = j.at("resolution");
  c.z_std = j.at("z_std");
  c.eps_std = j.at("eps_std");
  c.steps = j.at("steps");
  c.learning_rate = j.at("learning_rate");
  c.levels = j.at("levels");
  c.down_channels = j.at("down_channels");
  c.up_channels = j.at("up_channels");
  c.skip_channels = j.at("skip_channels");
  c.leaky_slope = j.at("leaky_slope");
}

void from_json(const Json& j, PipelineConfig& c) {
  c.iterations = j.at("iterations");
  c.initial_vertices = j.at("initial_vertices");
  c.max_part_faces = j.at("max_part_faces");
  c.partition_overlap_rings = j.at("partition_overlap_rings");
  c.refinement_vertex_schedule = j.at("refinement_vertex_schedule").get<std::vector<int>>();
  c.atlas_resolution = j.at("atlas_resolution");
  from_json(j.at("prior3d"), c.prior3d);
  from_json(j.at("prior2d_xyz"), c.prior2d_xyz);
  from_json(j.at("prior2d_rgb"), c.prior2d_rgb);
  c.texture = j.at("texture");
  c.early_stop_rms = j.at("early_stop_rms");
  c.seed = j.at("seed");
  c.checkpoint_dir = j.at("checkpoint_dir");
}

void from_json(const Json& j, EvaluationConfig& c) {
  c.samples = j.at("samples");
  c.threshold = j.at("threshold");
  c.emd_points = j.at("emd_points");
  c.seed = j.at("seed");
}

// Overlays `patch` onto `base`; every key must already exist in `base`.
void strict_merge(Json& base, const Json& patch, const std::string& path) {
  if (!patch.is_object()) throw ParameterError(path + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string sub = path + "." + key;
    if (!base.contains(key)) throw ParameterError("unknown config key '" + sub + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      strict_merge(slot, value, sub);
    } else {
      const bool number_ok = slot.is_number() && value.is_number();
      if (!number_ok && slot.type() != value.type()) {
        throw ParameterError("config key '" + sub + "' has the wrong type");
      }
      slot = value;
    }
  }
}

template <class T>
void overlay(T& config, const Json& j, const std::string& path) {
  Json base = to_json(config);
  strict_merge(base, j, path);
  T out = config;
  try {
    from_json(base, out);
  } catch (const nlohmann::json::exception& e) {
    throw ParameterError("invalid value under '" + path + "': " + e.what());
  }
  config = out;
}

}  // namespace

Json to_json(const PipelineConfig& c) {
  return {{"iterations", c.iterations},
          {"initial_vertices", c.initial_vertices},
          {"max_part_faces", c.max_part_faces},
          {"partition_overlap_rings", c.partition_overlap_rings},
          {"refinement_vertex_schedule", c.refinement_vertex_schedule},
          {"atlas_resolution", c.atlas_resolution},
          {"prior3d", to_json(c.prior3d)},
          {"prior2d_xyz", to_json(c.prior2d_xyz)},
          {"prior2d_rgb", to_json(c.prior2d_rgb)},
          {"texture", c.texture},
          {"early_stop_rms", c.early_stop_rms},
          {"seed", c.seed},
          {"checkpoint_dir", c.checkpoint_dir}};
}

Json to_json(const EvaluationConfig& c) {
  return {{"samples", c.samples}, {"threshold", c.threshold}, {"emd_points", c.emd_points}, {"seed", c.seed}};
}

Json to_json(const RunConfig& c) {
  return {{"preset", c.preset},
          {"input", c.input},
          {"output", c.output},
          {"pipeline", to_json(c.pipeline)},
          {"evaluation", to_json(c.evaluation)}};
}

void apply_json(PipelineConfig& config, const Json& j, const std::string& path) { overlay(config, j, path); }

void apply_json(EvaluationConfig& config, const Json& j, const std::string& path) { overlay(config, j, path); }

RunConfig run_config_from_json(const Json& j, const std::string& default_preset) {
  if (!j.is_object()) throw ParameterError("config root must be an object");
  RunConfig rc;
  rc.preset = j.contains("preset") ? j.at("preset").get<std::string>() : default_preset;
  rc.pipeline = preset_by_name(rc.preset);
  for (const auto& [key, value] : j.items()) {
    if (key == "preset") continue;
    if (key == "pipeline") {
      apply_json(rc.pipeline, value, "pipeline");
    } else if (key == "evaluation") {
      apply_json(rc.evaluation, value, "evaluation");
    } else if (key == "input" || key == "output") {
      if (!value.is_string()) throw ParameterError("config key '" + key + "' must be a string");
      (key == "input" ? rc.input : rc.output) = value.get<std::string>();
    } else {
      throw ParameterError("unknown config key '" + key + "'");
    }
  }
  return rc;
}

RunConfig load_run_config(const std::string& path, const std::string& default_preset) {
  Json j;
  try {
    j = Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParameterError("cannot parse config " + path + ": " + e.what());
  }
  return run_config_from_json(j, default_preset);
}

std::vector<std::string> apply_env_overrides(RunConfig& config, char** environment) {
  std::vector<std::string> applied;
  if (!environment) return applied;
  Json patch = Json::object();
  for (char** e = environment; *e; ++e) {
    const std::string entry = *e;
    if (entry.rfind("HSP_", 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string name = entry.substr(4, eq - 4);
    const std::string raw = entry.substr(eq + 1);
    for (char& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    std::vector<std::string> keys;
    for (std::size_t pos = 0;;) {
      const auto sep = name.find("__", pos);
      keys.push_back(name.substr(pos, sep == std::string::npos ? std::string::npos : sep - pos));
      if (sep == std::string::npos) break;
      pos = sep + 2;
    }
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    Json* slot = &patch;
    for (std::size_t k = 0; k + 1 < keys.size(); ++k) {
      if (!slot->contains(keys[k])) (*slot)[keys[k]] = Json::object();
      slot = &(*slot)[keys[k]];
    }
    (*slot)[keys.back()] = value;
    applied.push_back(entry.substr(0, eq));
  }
  if (patch.empty()) return applied;
  if (patch.contains("preset")) {
    config.pipeline = preset_by_name(patch.at("preset").get<std::string>());
    config.preset = patch.at("preset");
    patch.erase("preset");
  }
  for (const auto& [key, value] : patch.items()) {
    if (key == "pipeline") {
      apply_json(config.pipeline, value, "pipeline");
    } else if (key == "evaluation") {
      apply_json(config.evaluation, value, "evaluation");
    } else if (key == "input" || key == "output") {
      (key == "input" ? config.input : config.output) = value.is_string() ? value.get<std::string>() : value.dump();
    } else {
      throw ParameterError("unknown config override HSP_" + key);
    }
  }
  return applied;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const PipelineConfig& config) {
  Json j = to_json(config);
  j.erase("checkpoint_dir");
  return fnv1a_hex(j.dump());
}

}  // namespace hsp
