#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aerialnav/perception.hpp"
#include "aerialnav/policy.hpp"
#include "aerialnav/safety_action.hpp"

namespace aerialnav {

enum class ExecState { Idle, Navigating, Replanning, TaskComplete };
enum class ExecEvent { DecisionReady, Complete, ReplanRequested, TrajectoryExhausted, RefineInfeasible, Reset };

inline constexpr ExecState kAllStates[] = {ExecState::Idle, ExecState::Navigating, ExecState::Replanning,
                                           ExecState::TaskComplete};
inline constexpr ExecEvent kAllEvents[] = {ExecEvent::DecisionReady,       ExecEvent::Complete,
                                           ExecEvent::ReplanRequested,     ExecEvent::TrajectoryExhausted,
                                           ExecEvent::RefineInfeasible,    ExecEvent::Reset};

std::string to_string(ExecState state);
std::string to_string(ExecEvent event);
ExecState exec_state_from_string(const std::string& text);
ExecEvent exec_event_from_string(const std::string& text);

struct Transition {
  ExecState next;
  bool defined;  // false: pair absent from the table, state kept
};

/// Total transition function. TASK_COMPLETE absorbs everything but Reset and
/// is entered only on Complete.
Transition transition(ExecState state, ExecEvent event);
ExecState step_state_machine(ExecState state, ExecEvent event);

enum class Outcome { Success, Collision, Timeout, PolicyLost };
std::string to_string(Outcome outcome);
Outcome outcome_from_string(const std::string& text);

struct FrameRecord {
  double time = 0.0;
  Pose4D pose;
  Vec3 velocity = Vec3::Zero();
  std::optional<std::size_t> command_index;  // into EpisodeLog::commands
  std::size_t depth_index = 0;
};

struct CommandRecord {
  Command command;
  std::uint64_t generation = 0;
};

struct EventRecord {
  double time = 0.0;
  std::string kind;  // "transition", "decision", "no_decision", "refine", "warning"
  std::string detail;
  std::optional<ExecState> from;
  std::optional<ExecState> to;
  std::optional<ExecEvent> event;
  std::optional<NavDecision> decision;
};

struct TrajectoryRecord {
  std::uint64_t generation = 0;
  BSpline spline;
};

struct StageTimings {
  double perception_ms = 0.0;
  double refine_ms = 0.0;
  double policy_ms = 0.0;
  double control_ms = 0.0;
};

struct EpisodeLog {
  ScenarioSpec scenario;
  std::string policy;
  double control_rate = 30.0;
  double policy_rate = 2.5;
  double record_rate = 10.0;
  double policy_latency = 0.0;
  std::vector<FrameRecord> frames;
  std::vector<CommandRecord> commands;
  std::vector<EventRecord> events;
  std::vector<TrajectoryRecord> trajectories;
  Outcome outcome = Outcome::Timeout;
  double end_time = 0.0;
  StageTimings timings;  // wall-clock; not part of the serialized log
};

struct ExecutorConfig {
  double control_rate = 30.0;
  double policy_rate = 2.5;
  double record_rate = 10.0;
  double timeout_s = 60.0;
  double knot_span = 0.4;
  LatencyModel latency;
  PerceptionConfig perception;
  RefineConfig refine;  // margins are raised by the drone radius at run time
  bool refine_enabled = true;
  bool wall_clock = false;

  /// s_min and s_clear as used against obstacle samples for this radius.
  RefineConfig margins_for(double drone_radius) const;
  void validate() const;
};

/// Closed-loop episode. Deterministic mode steps a simulated clock; the same
/// inputs give an identical log.
EpisodeLog run_episode(const ScenarioSpec& scenario, Policy& policy, const ExecutorConfig& config);

}  // namespace aerialnav
