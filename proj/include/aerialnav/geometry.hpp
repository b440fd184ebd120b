#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace aerialnav {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Rigid3 = Eigen::Isometry3d;

constexpr double kPi = 3.14159265358979323846;

/// Maps any finite angle onto [-pi, pi). Throws InvalidInput on NaN/inf.
double wrap_yaw(double angle);

// World frame is right-handed with z up; yaw is measured about +z from +x.
struct Pose4D {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;

  Pose4D() = default;
  Pose4D(const Vec3& p, double psi) : position(p), yaw(psi) {}

  /// world_T_body
  Rigid3 transform() const;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct AxisAlignedBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
};

struct VerticalCylinder {
  Vec2 center_xy = Vec2::Zero();
  double radius = 1.0;
  double z_min = 0.0;
  double z_max = 1.0;
};

using Primitive = std::variant<Sphere, AxisAlignedBox, VerticalCylinder>;
using World = std::vector<Primitive>;

/// Throws InvalidInput when parameters are non-finite, radii are not positive
/// or box/cylinder extents are empty.
void validate(const Primitive& primitive);

double signed_distance(const Primitive& primitive, const Vec3& point);

/// Minimum over primitives; +infinity for an empty world.
double signed_distance(std::span<const Primitive> world, const Vec3& point);

/// Parameter interval [t_enter, t_exit] where origin + t*dir lies inside the
/// (convex) primitive, or nothing when the line misses it.
std::optional<std::pair<double, double>> ray_interval(const Primitive& primitive, const Vec3& origin,
                                                      const Vec3& dir);

/// Smallest positive hit parameter not exceeding max_range. Direction must be
/// unit length to 1e-9.
std::optional<double> ray_cast(std::span<const Primitive> world, const Vec3& origin, const Vec3& dir,
                               double max_range);

/// Rotation taking optical-frame vectors (x right, y down, z forward) into the
/// body frame (x forward, y left, z up).
Eigen::Matrix3d optical_to_body();

struct CameraModel {
  int width = 320;
  int height = 240;
  double fx = 200.0;
  double fy = 200.0;
  double cx = 159.5;
  double cy = 119.5;
  double min_range = 0.3;
  double max_range = 5.0;
  // body_T_camera. Forward mount, no tilt.
  Rigid3 body_to_camera = default_mount();

  static Rigid3 default_mount();
};

void validate(const CameraModel& camera);

/// Unit ray through pixel (u, v) in the optical frame.
Vec3 pixel_to_camera_ray(const CameraModel& camera, double u, double v);

/// Pinhole projection of an optical-frame point with z > 0.
Vec2 project(const CameraModel& camera, const Vec3& point_camera);

/// world_T_camera for a body pose.
Rigid3 camera_pose(const Pose4D& pose, const CameraModel& camera);

}  // namespace aerialnav
