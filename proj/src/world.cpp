#include "aerialnav/world.hpp"

#include <algorithm>
#include <cmath>

#include "aerialnav/errors.hpp"

namespace aerialnav {

DepthImage render_depth(std::span<const Primitive> world, const CameraModel& camera,
                        const Rigid3& world_T_camera, double t, int stride) {
  DepthImage image;
  image.width = camera.width;
  image.height = camera.height;
  image.timestamp = t;
  image.values.assign(static_cast<std::size_t>(camera.width) * camera.height, 0.0);
  if (world.empty()) return image;
  stride = std::max(stride, 1);

  const Eigen::Matrix3d rotation = world_T_camera.linear();
  const Vec3 origin = world_T_camera.translation();
  for (int v = 0; v < camera.height; v += stride) {
    for (int u = 0; u < camera.width; u += stride) {
      const Vec3 ray = pixel_to_camera_ray(camera, u, v);
      // ray.z() is the cosine to the optical axis; z-depth = range * ray.z().
      const double max_length = camera.max_range / ray.z();
      const auto hit = ray_cast(world, origin, (rotation * ray).normalized(), max_length);
      if (!hit) continue;
      const double z = *hit * ray.z();
      if (z >= camera.min_range && z <= camera.max_range)
        image.values[static_cast<std::size_t>(v) * camera.width + u] = z;
    }
  }
  return image;
}

SimState step_plant(const SimState& state, const Command& command, double dt, const KinematicLimits& limits,
                    const PlantParams& params) {
  if (!(dt > 0.0 && dt <= 0.1)) throw InvalidInput("step_plant: dt must be in (0, 0.1]");

  Vec3 v_target = command.velocity + params.k_p * (command.position - state.pose.position);
  const double cap = 1.25 * limits.v_max;
  const double n = v_target.norm();
  if (n > cap) v_target *= cap / n;

  // Exact discretisation of dv/dt = (v_target - v) / tau.
  const double alpha = params.tau > 0.0 ? -std::expm1(-dt / params.tau) : 1.0;

  SimState next;
  next.velocity = state.velocity + alpha * (v_target - state.velocity);
  next.pose.position = state.pose.position + next.velocity * dt;

  const double error = wrap_yaw(command.yaw - state.pose.yaw);
  const double max_step = limits.yaw_rate_max * dt;
  next.pose.yaw = wrap_yaw(state.pose.yaw + std::clamp(error, -max_step, max_step));
  next.time = state.time + dt;
  return next;
}

CollisionCheck check_collision(std::span<const Primitive> world, const Pose4D& pose, double drone_radius) {
  CollisionCheck out;
  out.clearance = signed_distance(world, pose.position) - drone_radius;
  out.collided = out.clearance < 0.0;
  return out;
}

}  // namespace aerialnav
