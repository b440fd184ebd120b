#include <gtest/gtest.h>

#include <cmath>

#include "aerialnav/errors.hpp"
#include "aerialnav/scenario_library.hpp"
#include "aerialnav/world.hpp"

using namespace aerialnav;

namespace {

constexpr const char* kMinimal = R"({
  "world": [{"type": "sphere", "center": [3, 0, 1.5], "radius": 0.5}],
  "start": [0, 0, 1.5, 0],
  "goals": [{"position": [6, 0, 1.5], "yaw": 0}]
})";

std::string with(const std::string& key, const std::string& value) {
  std::string doc = kMinimal;
  doc.insert(doc.rfind('}'), ", \"" + key + "\": " + value);
  return doc;
}

std::string field_of(const std::string& doc) {
  try {
    load_scenario(doc);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST(ScenarioIo, LoadsMinimalDocumentWithDefaults) {
  const ScenarioSpec s = load_scenario(kMinimal);
  ASSERT_EQ(s.world.size(), 1u);
  ASSERT_EQ(s.goals.size(), 1u);
  EXPECT_DOUBLE_EQ(s.goals[0].success_radius, 0.5);
  EXPECT_DOUBLE_EQ(s.limits.v_max, 2.0);
  EXPECT_DOUBLE_EQ(s.drone_radius, 0.2);
  EXPECT_EQ(s.camera.width, 320);
}

TEST(ScenarioIo, RoundTripIsStable) {
  for (auto kind : kAllScenarioKinds) {
    const ScenarioSpec s = make_scenario(kind, 17);
    const std::string text = serialize_scenario(s);
    const ScenarioSpec back = load_scenario(text);
    EXPECT_EQ(serialize_scenario(back), text) << to_string(kind);
    EXPECT_EQ(back.world.size(), s.world.size());
    EXPECT_EQ(back.seed, s.seed);
  }
}

TEST(ScenarioIo, ReportsOffendingField) {
  EXPECT_EQ(field_of(R"({"start": [0,0,1,0], "goals": [{"position": [1,0,1], "yaw": 0}]})"), "world");
  EXPECT_EQ(field_of(with("bounds", R"({"min": [0,0,0], "max": [0,1,1]})")), "bounds");
  EXPECT_EQ(field_of(with("drone_radius", "-1")), "drone_radius");
  EXPECT_EQ(field_of(with("limits", R"({"v_max": 0})")), "limits");
  EXPECT_EQ(field_of(with("colour", "1")), "colour");
  // Start inside the sphere.
  std::string inside = kMinimal;
  inside.replace(inside.find("[0, 0, 1.5, 0]"), 14, "[3, 0, 1.5, 0]");
  EXPECT_EQ(field_of(inside), "start");
  std::string outside = kMinimal;
  outside.replace(outside.find("[6, 0, 1.5]"), 11, "[60, 0, 1.5]");
  EXPECT_EQ(field_of(outside), "goals[0]");
}

TEST(ScenarioIo, MalformedJsonIsParseError) {
  EXPECT_THROW(load_scenario("{\"world\": ["), ParseError);
  EXPECT_THROW(load_scenario_file("/nonexistent/scenario.json"), InvalidInput);
}

TEST(RenderDepth, WallGivesConstantZDepth) {
  CameraModel cam;
  cam.width = 64;
  cam.height = 48;
  cam.fx = cam.fy = 40.0;
  cam.cx = 31.5;
  cam.cy = 23.5;
  const World world{AxisAlignedBox{Vec3(3.1, -20, -20), Vec3(4, 20, 20)}};
  const Pose4D pose(Vec3(0, 0, 1), 0.0);
  const DepthImage d = render_depth(world, cam, camera_pose(pose, cam), 1.5);
  EXPECT_DOUBLE_EQ(d.timestamp, 1.5);
  for (double z : d.values) EXPECT_NEAR(z, 3.0, 1e-9);
}

TEST(RenderDepth, OutOfRangeAndMissesAreZero) {
  const CameraModel cam;
  const World far{Sphere{Vec3(20, 0, 1), 1.0}};
  const DepthImage d = render_depth(far, cam, camera_pose(Pose4D(Vec3(0, 0, 1), 0.0), cam), 0.0);
  for (double z : d.values) EXPECT_EQ(z, 0.0);
  const World empty;
  EXPECT_EQ(render_depth(empty, cam, Rigid3::Identity(), 0.0).values.size(), 320u * 240u);
}

TEST(RenderDepth, StrideLeavesOffGridPixelsEmpty) {
  CameraModel cam;
  const World world{AxisAlignedBox{Vec3(2.1, -20, -20), Vec3(4, 20, 20)}};
  const DepthImage d = render_depth(world, cam, camera_pose(Pose4D(Vec3(0, 0, 1), 0.0), cam), 0.0, 4);
  for (int v = 0; v < cam.height; ++v)
    for (int u = 0; u < cam.width; ++u) {
      if (u % 4 == 0 && v % 4 == 0)
        EXPECT_NEAR(d.at(u, v), 2.0, 1e-9);
      else
        EXPECT_EQ(d.at(u, v), 0.0);
    }
}

TEST(StepPlant, ConvergesToCommandedHover) {
  SimState s;
  s.pose = Pose4D(Vec3::Zero(), 0.0);
  Command c;
  c.position = Vec3(1, 0, 0);
  c.yaw = 1.0;
  for (int i = 0; i < 600; ++i) s = step_plant(s, c, 1.0 / 30.0, KinematicLimits{});
  EXPECT_NEAR((s.pose.position - c.position).norm(), 0.0, 1e-6);
  EXPECT_NEAR(s.pose.yaw, 1.0, 1e-12);
  EXPECT_NEAR(s.time, 20.0, 1e-9);
}

TEST(StepPlant, VelocityResponseIsExactFirstOrderLag) {
  SimState s;
  Command c;
  c.velocity = Vec3(1, 0, 0);
  PlantParams p{0.2, 0.0};
  const double dt = 0.05;
  for (int i = 1; i <= 10; ++i) {
    s = step_plant(s, c, dt, KinematicLimits{}, p);
    EXPECT_NEAR(s.velocity.x(), 1.0 - std::exp(-i * dt / p.tau), 1e-12);
  }
}

TEST(StepPlant, YawRateIsLimited) {
  SimState s;
  Command c;
  c.yaw = 3.0;
  const KinematicLimits lim;
  s = step_plant(s, c, 0.1, lim);
  EXPECT_NEAR(s.pose.yaw, lim.yaw_rate_max * 0.1, 1e-12);
  EXPECT_THROW(step_plant(s, c, 0.2, lim), InvalidInput);
  EXPECT_THROW(step_plant(s, c, 0.0, lim), InvalidInput);
}

TEST(Collision, ClearanceSubtractsRadius) {
  const World world{Sphere{Vec3(2, 0, 0), 1.0}};
  auto c = check_collision(world, Pose4D(Vec3::Zero(), 0.0), 0.2);
  EXPECT_NEAR(c.clearance, 0.8, 1e-12);
  EXPECT_FALSE(c.collided);
  c = check_collision(world, Pose4D(Vec3(0.9, 0, 0), 0.0), 0.2);
  EXPECT_TRUE(c.collided);
}
