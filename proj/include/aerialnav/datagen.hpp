#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aerialnav/executor.hpp"

namespace aerialnav {

/// Child seed for scenario `index` (splitmix64 of the pair).
std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index);

struct GenerationOptions {
  double s_clear = 0.4;          // endpoint clearance beyond the drone radius
  double min_separation = 2.0;   // between consecutive endpoints
  int max_attempts = 10000;      // per scenario
};

/// Resamples the start and every goal of the template uniformly inside its
/// bounds. Start yaw faces the first goal; goal yaws are kept.
std::vector<ScenarioSpec> generate_scenarios(const ScenarioSpec& scenario_template, std::size_t n,
                                             std::uint64_t master_seed, const GenerationOptions& options = {});

struct Metrics {
  bool success = false;
  int collisions = 0;
  double path_length = 0.0;
  double min_clearance = 0.0;  // +inf in an obstacle-free world
  std::optional<double> time_to_complete;
  int replan_count = 0;
};

/// Path length and clearance come from the recorded frame poses; clearance is
/// signed distance minus the drone radius.
Metrics compute_metrics(const EpisodeLog& log, const ScenarioSpec& scenario);

struct RecordSummary {
  std::string directory;
  std::size_t depth_frames = 0;
  std::size_t pose_rows = 0;
  std::size_t command_rows = 0;
};

/// Writes <dir>/manifest, poses.csv, commands.csv and depth/NNNNNN.pgm (16-bit
/// millimetres) re-rendered from the logged poses. Throws WriteError.
RecordSummary record_episode(const EpisodeLog& log, const std::string& output_dir);

using PoseRow = std::array<double, 8>;      // time, x, y, z, yaw, vx, vy, vz
using CommandRow = std::array<double, 12>;  // time, x, y, z, vx, vy, vz, ax, ay, az, yaw, generation

struct Dataset {
  std::string manifest;
  std::vector<PoseRow> poses;
  std::vector<CommandRow> commands;
  std::vector<std::string> depth_files;  // sorted, relative to the directory
};

Dataset read_dataset(const std::string& directory);

/// Binary PGM (P5) with maxval 65535, most significant byte first.
void write_pgm16(const std::string& path, int width, int height, const std::vector<std::uint16_t>& pixels);
std::vector<std::uint16_t> read_pgm16(const std::string& path, int& width, int& height);

struct ProfileReport {
  std::vector<std::pair<std::string, double>> stages;  // milliseconds, pipeline order
  double total_ms = 0.0;

  double stage(const std::string& name) const;
};

struct Speedup {
  double factor = 1.0;
  double percent_reduction = 0.0;
  std::map<std::string, double> per_stage;            // factor
  std::map<std::string, double> per_stage_reduction;  // percent
};

/// Stage sets must match; a zero duration after the change is InvalidInput.
Speedup compute_speedup(const ProfileReport& before, const ProfileReport& after);

struct ProfileConfig {
  int width = 640;
  int height = 480;
  int stride = 1;
  Eigen::Index control_points = 30;
  int refine_iterations = 200;
  bool refine_enabled = true;
  ExecutorConfig executor;
};

/// Median stage durations over repetitions of one replan cycle: backprojection,
/// conflict detection, refinement at a fixed iteration count, time
/// reallocation, the policy call and one policy period of command sampling.
/// The depth image is rendered once, outside the timed region.
ProfileReport profile_pipeline(const ScenarioSpec& scenario, Policy& policy, const ProfileConfig& config,
                               int repetitions);

}  // namespace aerialnav
