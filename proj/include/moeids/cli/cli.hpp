#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "moeids/data/pipeline.hpp"
#include "moeids/train/config.hpp"

namespace moeids::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitSchema = 3,
  kExitRuntime = 4,
};

/// Everything one invocation needs. Precedence: command-line flags, then the
/// --config file, then these defaults.
struct RunConfig {
  std::string command;
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path out = "runs";
  data::PipelineOptions pipeline;
  train::TrainConfig train;
  /// Ablation variant for train, or the list of variants for ablate.
  std::vector<std::string> ablate;
  /// "n:k,..." pairs; empty means no sweep.
  std::string expert_grid;
  /// evaluate/gating-report: score the held-out split ("test") or every row ("all").
  std::string split = "test";
  /// Stdout report format: "text" or "json".
  std::string format = "text";

  /// Fields that define the run's artifacts; excludes timestamps and paths
  /// derived from them.
  nlohmann::json to_json() const;
};

/// Runs one command line. Messages go to `out` and `err`; returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Applies MOEIDS_LOG_LEVEL (trace, debug, info, warn, error, off).
void configure_logging();

}  // namespace moeids::cli
