#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "d4d/eval.hpp"
#include "d4d/qa.hpp"

namespace d4d {

struct PipelineConfig {
  std::size_t d_vis = 64;
  std::size_t d_ins = 8;
  std::size_t queries = 8;
  double alpha = 0.5;
  double fps = 5.0;
  std::size_t octree_target = 250'000;
  std::size_t token_budget = 1024;
  std::size_t fuse_cap = 4096;
  double window = 10.0;
  double stride = 5.0;
  // Demo scene parameters, used when `scene` is empty.
  std::size_t objects = 5;
  double duration = 20.0;
  std::string scene;  // SimConfig JSON path
  std::uint64_t sim_seed = 42;
  std::uint64_t encoder_seed = 7;
  std::uint64_t weight_seed = 7;
  std::uint64_t qa_seed = 3;

  // Throws Errc::kConfig.
  void validate() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Runs simulate, lift, compress, encode, qagen and self-eval into `out_dir`
// and returns the summary also written to summary.json. A failing stage is
// reported as "<stage>: <message>".
nlohmann::json run_pipeline(const PipelineConfig& config, const std::filesystem::path& out_dir);

// Human-readable dump of any artifact, detected by magic or JSON shape.
std::string inspect_file(const std::filesystem::path& path);

}  // namespace d4d
