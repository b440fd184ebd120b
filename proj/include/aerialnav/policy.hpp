#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerialnav/world.hpp"

namespace aerialnav {

struct Observation {
  Pose4D pose;
  std::optional<DepthImage> depth;
  std::string instruction;
  double episode_time = 0.0;
  std::uint64_t initial_frame_ref = 0;
  std::uint64_t seq = 0;
};

struct NavDecision {
  Vec3 waypoint = Vec3::Zero();
  double yaw = 0.0;
  bool complete = false;
  bool replan = false;
  std::uint64_t seq = 0;
};

/// Throws InvalidInput unless the waypoint is finite and yaw lies in [-pi, pi).
void validate(const NavDecision& decision);

/// Position within the goal radius and yaw within this tolerance.
inline constexpr double kCompletionYawTolerance = 0.3;
/// Waypoints never lie farther than this along the line of sight.
inline constexpr double kWaypointHorizon = 5.0;

bool goal_reached(const Pose4D& pose, const Goal& goal);

struct OracleOptions {
  // Minimum ground-truth obstacle distance for an emitted waypoint.
  double waypoint_clearance = 0.6;
  // Inside this horizontal distance the goal yaw replaces the bearing.
  double align_radius = 1.0;
};

/// Ground-truth policy step toward scenario.goals[active_goal_index]. Returns
/// complete when that goal is reached; otherwise the goal clipped to the
/// waypoint horizon, moved sideways off obstacles when the clipped point has
/// too little clearance.
NavDecision oracle_decide(const Observation& obs, const ScenarioSpec& scenario, std::size_t active_goal_index,
                          const OracleOptions& options = {});

/// Sequential subgoals. `progress` indexes the current subgoal and only ever
/// moves forward by one per satisfied subgoal.
NavDecision scripted_decide(const Observation& obs, std::span<const Goal> subgoals, std::size_t& progress,
                            const World& world = {}, const OracleOptions& options = {});

struct LatencyModel {
  double seconds_per_token = 0.05;
  int output_tokens = 8;
  double prefill_seconds = 0.0;
};

/// output_tokens * seconds_per_token + prefill_seconds.
double simulate_policy_latency(int output_tokens, double seconds_per_token, double prefill_seconds = 0.0);
double simulate_policy_latency(const LatencyModel& model);

/// Decision source seen by the executor. An empty result is NoDecision: the
/// executor keeps flying the previous trajectory.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::optional<NavDecision> decide(const Observation& obs) = 0;
  virtual std::string name() const = 0;
  virtual bool wants_depth() const { return false; }
};

class OraclePolicy : public Policy {
 public:
  explicit OraclePolicy(ScenarioSpec scenario, OracleOptions options = {});
  std::optional<NavDecision> decide(const Observation& obs) override;
  std::string name() const override { return "oracle"; }
  std::size_t active_goal() const { return progress_; }

 private:
  ScenarioSpec scenario_;
  OracleOptions options_;
  std::size_t progress_ = 0;
};

class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(std::vector<Goal> subgoals, World world = {}, OracleOptions options = {});
  std::optional<NavDecision> decide(const Observation& obs) override;
  std::string name() const override { return "scripted"; }
  std::size_t progress() const { return progress_; }
  // Progress value after every decide call, in call order.
  const std::vector<std::size_t>& progress_history() const { return history_; }

 private:
  std::vector<Goal> subgoals_;
  World world_;
  OracleOptions options_;
  std::size_t progress_ = 0;
  std::vector<std::size_t> history_;
};

}  // namespace aerialnav
