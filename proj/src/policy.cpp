#include "aerialnav/policy.hpp"

#include <cmath>

#include "aerialnav/errors.hpp"

namespace aerialnav {

namespace {

bool inside(const AxisAlignedBox& box, const Vec3& p) {
  return (p.array() >= box.min.array()).all() && (p.array() <= box.max.array()).all();
}

NavDecision decide_toward(const Pose4D& pose, const Goal& goal, const World& world, const AxisAlignedBox* bounds,
                          const OracleOptions& options) {
  NavDecision d;
  const Vec3 delta = goal.position - pose.position;
  const double distance = delta.norm();
  d.waypoint = distance > kWaypointHorizon ? Vec3(pose.position + delta * (kWaypointHorizon / distance)) : goal.position;
  d.yaw = delta.head<2>().norm() < options.align_radius ? wrap_yaw(goal.yaw)
                                                         : wrap_yaw(std::atan2(delta.y(), delta.x()));

  const auto free = [&](const Vec3& p) {
    return signed_distance(world, p) >= options.waypoint_clearance && (bounds == nullptr || inside(*bounds, p));
  };
  if (world.empty() || d.waypoint == goal.position || free(d.waypoint)) return d;

  Vec3 lateral = Vec3::UnitZ().cross(delta);
  lateral = lateral.norm() > 1e-9 ? Vec3(lateral.normalized()) : Vec3::UnitY();
  for (double offset = 0.25; offset <= 3.0 + 1e-9; offset += 0.25) {
    for (double side : {1.0, -1.0}) {
      const Vec3 candidate = d.waypoint + side * offset * lateral;
      if (free(candidate)) {
        d.waypoint = candidate;
        return d;
      }
    }
  }
  const Vec3 dir = delta / distance;
  for (double s = kWaypointHorizon - 0.25; s > 0.0; s -= 0.25) {
    if (free(pose.position + s * dir)) {
      d.waypoint = pose.position + s * dir;
      return d;
    }
  }
  d.waypoint = pose.position;
  return d;
}

}  // namespace

void validate(const NavDecision& decision) {
  if (!decision.waypoint.allFinite()) throw InvalidInput("NavDecision: waypoint must be finite");
  if (!(decision.yaw >= -kPi && decision.yaw < kPi)) throw InvalidInput("NavDecision: yaw must lie in [-pi, pi)");
}

bool goal_reached(const Pose4D& pose, const Goal& goal) {
  return (pose.position - goal.position).norm() <= goal.success_radius &&
         std::abs(wrap_yaw(pose.yaw - goal.yaw)) <= kCompletionYawTolerance;
}

NavDecision oracle_decide(const Observation& obs, const ScenarioSpec& scenario, std::size_t active_goal_index,
                          const OracleOptions& options) {
  if (active_goal_index >= scenario.goals.size()) throw InvalidInput("oracle_decide: goal index out of range");
  const Goal& goal = scenario.goals[active_goal_index];
  NavDecision d;
  if (goal_reached(obs.pose, goal)) {
    d.waypoint = goal.position;
    d.yaw = wrap_yaw(goal.yaw);
    d.complete = true;
  } else {
    d = decide_toward(obs.pose, goal, scenario.world, &scenario.bounds, options);
  }
  d.seq = obs.seq;
  return d;
}

NavDecision scripted_decide(const Observation& obs, std::span<const Goal> subgoals, std::size_t& progress,
                            const World& world, const OracleOptions& options) {
  if (subgoals.empty()) throw InvalidInput("scripted_decide: empty subgoal list");
  if (progress >= subgoals.size()) progress = subgoals.size() - 1;
  if (progress + 1 < subgoals.size() && goal_reached(obs.pose, subgoals[progress])) ++progress;

  const Goal& goal = subgoals[progress];
  NavDecision d;
  if (progress + 1 == subgoals.size() && goal_reached(obs.pose, goal)) {
    d.waypoint = goal.position;
    d.yaw = wrap_yaw(goal.yaw);
    d.complete = true;
  } else {
    d = decide_toward(obs.pose, goal, world, nullptr, options);
  }
  d.seq = obs.seq;
  return d;
}

double simulate_policy_latency(int output_tokens, double seconds_per_token, double prefill_seconds) {
  if (output_tokens < 0 || seconds_per_token < 0.0 || prefill_seconds < 0.0)
    throw InvalidInput("simulate_policy_latency: counts and rates must be non-negative");
  return output_tokens * seconds_per_token + prefill_seconds;
}

double simulate_policy_latency(const LatencyModel& model) {
  return simulate_policy_latency(model.output_tokens, model.seconds_per_token, model.prefill_seconds);
}

OraclePolicy::OraclePolicy(ScenarioSpec scenario, OracleOptions options)
    : scenario_(std::move(scenario)), options_(options) {
  if (scenario_.goals.empty()) throw InvalidInput("OraclePolicy: scenario has no goals");
}

std::optional<NavDecision> OraclePolicy::decide(const Observation& obs) {
  if (progress_ + 1 < scenario_.goals.size() && goal_reached(obs.pose, scenario_.goals[progress_])) ++progress_;
  return oracle_decide(obs, scenario_, progress_, options_);
}

ScriptedPolicy::ScriptedPolicy(std::vector<Goal> subgoals, World world, OracleOptions options)
    : subgoals_(std::move(subgoals)), world_(std::move(world)), options_(options) {
  if (subgoals_.empty()) throw InvalidInput("ScriptedPolicy: empty subgoal list");
}

std::optional<NavDecision> ScriptedPolicy::decide(const Observation& obs) {
  auto d = scripted_decide(obs, subgoals_, progress_, world_, options_);
  history_.push_back(progress_);
  return d;
}

}  // namespace aerialnav
