#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "aerialnav/datagen.hpp"
#include "aerialnav/executor.hpp"

namespace aerialnav {

/// Process exit codes.
enum ExitCode : int { kExitSuccess = 0, kExitFailure = 2, kExitConfigError = 3 };

struct RunConfig {
  std::vector<std::string> scenario_paths;
  std::string policy = "oracle";  // oracle | scripted | remote:<host>:<port>
  std::optional<std::uint64_t> seed;
  ExecutorConfig executor;
  std::string output_dir = "out";
  double remote_timeout_s = 2.0;
  bool send_depth = false;

  void validate() const;
};

/// Policy for the selector in config.policy; InvalidInput on a bad selector.
std::unique_ptr<Policy> make_policy(const RunConfig& config, const ScenarioSpec& scenario);

struct SuiteEntry {
  std::string category;
  std::string scenario_path;
};

/// {"episodes": [{"category": ..., "scenario": <path relative to the manifest>}]}
std::vector<SuiteEntry> load_suite_manifest(const std::string& path);

struct SuiteRow {
  std::string category;
  int episodes = 0;
  double success_rate = 0.0;  // percent
  double mean_path_m = 0.0;
  double mean_clearance_m = 0.0;  // over episodes with a finite clearance
};

std::string suite_csv(const std::vector<SuiteRow>& rows);

/// Entry point of the command-line tool; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aerialnav
