#pragma once

#include <filesystem>
#include <string>

#include "refsplat/optimizer.hpp"

namespace refsplat {

// Fully-resolved run settings: defaults <- config file <- command-line flags.
// Every field round-trips through the JSON serialization, so a re-run from the
// resolved file written next to the outputs reproduces the run.
struct RunConfig {
  std::string data_dir;
  std::string out_dir;
  uint64_t seed = 0;
  int target_width = 1296;
  int target_height = 864;
  int threads = 0;  // 0 = leave the OpenMP default alone
  TrainConfig train;

  void validate() const;  // throws std::invalid_argument
};

std::string serialize_run_config(const RunConfig& cfg);
RunConfig parse_run_config(const std::string& json_text, const RunConfig& base);
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

// Short hex digest of the serialized config, for report headers.
std::string run_config_hash(const RunConfig& cfg);

// Checkpoint = extended PLY next to a versioned optimizer-state blob, so a run
// can resume with Adam moments and densification statistics intact.
void save_checkpoint(const GaussianCloud& cloud, const OptimizerState& state,
                     const std::filesystem::path& ply_path);
void load_checkpoint(const std::filesystem::path& ply_path, GaussianCloud& cloud,
                     OptimizerState& state);

}  // namespace refsplat
