#pragma once

#include "hsp/pipeline.hpp"

#include <json.hpp>

#include <string>

namespace hsp {

using Json = nlohmann::ordered_json;

// Everything a CLI run needs: the preset the values start from, every module
// setting, evaluation protocol, and paths.
struct RunConfig {
  std::string preset = "desk";
  PipelineConfig pipeline = desk_preset();
  EvaluationConfig evaluation;
  std::string input;
  std::string output;
};

Json to_json(const PipelineConfig& config);
Json to_json(const EvaluationConfig& config);
Json to_json(const RunConfig& config);

// Overlays `j` onto `config`. Unknown keys throw ParameterError naming the key path.
void apply_json(PipelineConfig& config, const Json& j, const std::string& path = "pipeline");
void apply_json(EvaluationConfig& config, const Json& j, const std::string& path = "evaluation");
// Starts from the preset named in j["preset"] (or `default_preset`) and overlays the rest.
RunConfig run_config_from_json(const Json& j, const std::string& default_preset = "desk");
RunConfig load_run_config(const std::string& path, const std::string& default_preset = "desk");

// HSP_<KEY>[__<KEY>...] variables override config keys, e.g.
// HSP_PIPELINE__ITERATIONS=2 or HSP_EVALUATION__SAMPLES=50000. Values are JSON
// (bare words are taken as strings). Returns the names applied.
std::vector<std::string> apply_env_overrides(RunConfig& config, char** environment);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);
// Hash of the canonical JSON of the settings that affect results.
std::string config_hash(const PipelineConfig& config);

}  // namespace hsp
