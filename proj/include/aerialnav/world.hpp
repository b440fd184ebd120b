#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aerialnav/geometry.hpp"

namespace aerialnav {

struct KinematicLimits {
  double v_max = 2.0;
  double a_max = 3.0;
  double yaw_rate_max = 1.5;
};

// First-order velocity lag with position feedback.
struct PlantParams {
  double tau = 0.1;
  double k_p = 1.0;
};

struct Goal {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double success_radius = 0.5;
};

struct ScenarioSpec {
  std::string name = "unnamed";
  std::uint64_t seed = 0;
  World world;
  Pose4D start;
  std::vector<Goal> goals;
  std::string instruction;
  KinematicLimits limits;
  CameraModel camera;
  AxisAlignedBox bounds{Vec3(-50.0, -50.0, 0.0), Vec3(50.0, 50.0, 10.0)};
  double drone_radius = 0.2;
  PlantParams plant;
};

/// Row-major z-depth in meters; 0 means no return.
struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;
  double timestamp = 0.0;

  double at(int u, int v) const { return values[static_cast<std::size_t>(v) * width + u]; }
};

struct SimState {
  Pose4D pose;
  Vec3 velocity = Vec3::Zero();
  double time = 0.0;
};

struct Command {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 acceleration = Vec3::Zero();
  double yaw = 0.0;
  double timestamp = 0.0;
};

/// Parses and validates a scenario document. Throws ParseError on malformed
/// text and ValidationError naming the offending field otherwise.
ScenarioSpec load_scenario(std::string_view document);
ScenarioSpec load_scenario_file(const std::string& path);

/// Checks every ScenarioSpec invariant; throws ValidationError.
void validate(const ScenarioSpec& spec);

std::string serialize_scenario(const ScenarioSpec& spec);

/// Renders z-depth along each pixel ray. Hits outside [min_range, max_range]
/// and misses encode 0. With stride > 1 only pixels on the stride grid are
/// traced; the rest are left at 0.
DepthImage render_depth(std::span<const Primitive> world, const CameraModel& camera,
                        const Rigid3& world_T_camera, double t, int stride = 1);

/// Advances the plant by dt in (0, 0.1].
SimState step_plant(const SimState& state, const Command& command, double dt, const KinematicLimits& limits,
                    const PlantParams& params = {});

struct CollisionCheck {
  double clearance = 0.0;
  bool collided = false;
};

CollisionCheck check_collision(std::span<const Primitive> world, const Pose4D& pose, double drone_radius);

}  // namespace aerialnav
