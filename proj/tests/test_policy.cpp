#include <gtest/gtest.h>

#include "aerialnav/errors.hpp"
#include "aerialnav/policy.hpp"

using namespace aerialnav;

namespace {

Observation at(const Vec3& p, double yaw, std::uint64_t seq = 0) {
  Observation obs;
  obs.pose = Pose4D(p, yaw);
  obs.seq = seq;
  return obs;
}

ScenarioSpec straight_scenario(World world = {}) {
  ScenarioSpec s;
  s.world = std::move(world);
  s.start = Pose4D(Vec3(0, 0, 1.5), 0.0);
  s.goals = {Goal{Vec3(12, 0, 1.5), 0.5, 0.5}};
  return s;
}

}  // namespace

TEST(GoalReached, NeedsPositionAndYaw) {
  const Goal g{Vec3(1, 0, 0), 0.0, 0.5};
  EXPECT_TRUE(goal_reached(Pose4D(Vec3(1.4, 0, 0), 0.29), g));
  EXPECT_FALSE(goal_reached(Pose4D(Vec3(1.6, 0, 0), 0.0), g));
  EXPECT_FALSE(goal_reached(Pose4D(Vec3(1, 0, 0), 0.31), g));
  // Yaw error is measured the short way round.
  const Goal h{Vec3::Zero(), 3.1, 0.5};
  EXPECT_TRUE(goal_reached(Pose4D(Vec3::Zero(), -3.1), h));
}

TEST(OracleDecide, ClipsToHorizonAndFacesGoal) {
  const auto s = straight_scenario();
  const auto d = oracle_decide(at(Vec3(0, 0, 1.5), 1.0, 7), s, 0);
  EXPECT_NEAR((d.waypoint - Vec3(kWaypointHorizon, 0, 1.5)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(d.yaw, 0.0, 1e-12);
  EXPECT_FALSE(d.complete);
  EXPECT_EQ(d.seq, 7u);
  EXPECT_NO_THROW(validate(d));
}

TEST(OracleDecide, CompletesAtGoalWithGoalYaw) {
  const auto s = straight_scenario();
  const auto d = oracle_decide(at(Vec3(11.8, 0, 1.5), 0.5), s, 0);
  EXPECT_TRUE(d.complete);
  const auto near = oracle_decide(at(Vec3(11.8, 0, 1.5), 1.0), s, 0);
  EXPECT_FALSE(near.complete);
  EXPECT_NEAR(near.yaw, 0.5, 1e-12);
  EXPECT_THROW(oracle_decide(at(Vec3::Zero(), 0.0), s, 1), InvalidInput);
}

TEST(OracleDecide, ShiftsWaypointOffObstacles) {
  const auto s = straight_scenario({Sphere{Vec3(kWaypointHorizon, 0, 1.5), 0.8}});
  const auto d = oracle_decide(at(Vec3(0, 0, 1.5), 0.0), s, 0);
  EXPECT_GE(signed_distance(s.world, d.waypoint), OracleOptions{}.waypoint_clearance);
  EXPECT_NEAR(d.waypoint.x(), kWaypointHorizon, 1e-12);
}

TEST(ScriptedDecide, ProgressMovesForwardOneStepAtATime) {
  const std::vector<Goal> goals{{Vec3(2, 0, 1), 0.0, 0.5}, {Vec3(2, 0.1, 1), 0.0, 0.5}, {Vec3(6, 0, 1), 0.0, 0.5}};
  std::size_t progress = 0;
  // Inside both of the first two goal regions at once: only one step.
  scripted_decide(at(Vec3(2, 0.05, 1), 0.0), goals, progress);
  EXPECT_EQ(progress, 1u);
  scripted_decide(at(Vec3(2, 0.05, 1), 0.0), goals, progress);
  EXPECT_EQ(progress, 2u);
  const auto d = scripted_decide(at(Vec3(0, 0, 1), 0.0), goals, progress);
  EXPECT_EQ(progress, 2u);
  EXPECT_FALSE(d.complete);
  EXPECT_TRUE(scripted_decide(at(Vec3(6, 0, 1), 0.0), goals, progress).complete);
  EXPECT_THROW(scripted_decide(at(Vec3::Zero(), 0.0), std::span<const Goal>{}, progress), InvalidInput);
}

TEST(ScriptedPolicy, HistoryIsMonotone) {
  ScriptedPolicy p({{Vec3(1, 0, 1), 0.0, 0.5}, {Vec3(2, 0, 1), 0.0, 0.5}, {Vec3(3, 0, 1), 0.0, 0.5}});
  for (double x : {0.0, 1.0, 1.0, 0.0, 2.0, 3.0, 3.0, 1.0}) p.decide(at(Vec3(x, 0, 1), 0.0));
  const auto& h = p.progress_history();
  ASSERT_EQ(h.size(), 8u);
  for (std::size_t i = 1; i < h.size(); ++i) {
    EXPECT_GE(h[i], h[i - 1]);
    EXPECT_LE(h[i] - h[i - 1], 1u);
  }
  EXPECT_EQ(p.progress(), 2u);
}

TEST(OraclePolicy, AdvancesThroughSubgoals) {
  ScenarioSpec s = straight_scenario();
  s.goals = {{Vec3(2, 0, 1.5), 0.0, 0.5}, {Vec3(4, 0, 1.5), 0.0, 0.5}};
  OraclePolicy p(s);
  EXPECT_EQ(p.active_goal(), 0u);
  EXPECT_FALSE(p.decide(at(Vec3(2, 0, 1.5), 0.0))->complete);
  EXPECT_EQ(p.active_goal(), 1u);
  EXPECT_TRUE(p.decide(at(Vec3(4, 0, 1.5), 0.0))->complete);
  s.goals.clear();
  EXPECT_THROW(OraclePolicy{s}, InvalidInput);
}

TEST(Latency, LinearInTokens) {
  EXPECT_DOUBLE_EQ(simulate_policy_latency(8, 0.05), 0.4);
  EXPECT_DOUBLE_EQ(simulate_policy_latency(0, 0.05, 0.1), 0.1);
  EXPECT_DOUBLE_EQ(simulate_policy_latency(LatencyModel{}), 0.4);
  EXPECT_THROW(simulate_policy_latency(-1, 0.05), InvalidInput);
}

TEST(NavDecision, ValidateRejectsBadValues) {
  NavDecision d;
  d.yaw = kPi;
  EXPECT_THROW(validate(d), InvalidInput);
  d.yaw = 0.0;
  d.waypoint.x() = std::nan("");
  EXPECT_THROW(validate(d), InvalidInput);
}
