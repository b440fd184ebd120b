#include "aerialnav/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aerialnav/errors.hpp"

namespace aerialnav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool finite(const Vec3& v) { return v.allFinite(); }

struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool empty() const { return lo > hi; }
};

// Slab test along one axis.
Interval slab(double origin, double dir, double lo, double hi) {
  if (std::abs(dir) < 1e-300) {
    if (origin < lo || origin > hi) return {kInf, -kInf};
    return {};
  }
  double t0 = (lo - origin) / dir;
  double t1 = (hi - origin) / dir;
  if (t0 > t1) std::swap(t0, t1);
  return {t0, t1};
}

Interval intersect(Interval a, Interval b) { return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)}; }

struct SdfVisitor {
  const Vec3& p;

  double operator()(const Sphere& s) const { return (p - s.center).norm() - s.radius; }

  double operator()(const AxisAlignedBox& b) const {
    const Vec3 center = 0.5 * (b.min + b.max);
    const Vec3 half = 0.5 * (b.max - b.min);
    const Vec3 q = (p - center).cwiseAbs() - half;
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }

  double operator()(const VerticalCylinder& c) const {
    const double radial = (p.head<2>() - c.center_xy).norm() - c.radius;
    const double half = 0.5 * (c.z_max - c.z_min);
    const double axial = std::abs(p.z() - 0.5 * (c.z_max + c.z_min)) - half;
    const Vec2 q(radial, axial);
    return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
};

struct RayVisitor {
  const Vec3& o;
  const Vec3& d;

  Interval operator()(const Sphere& s) const {
    const Vec3 oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return {kInf, -kInf};
    const double root = std::sqrt(disc);
    return {-b - root, -b + root};
  }

  Interval operator()(const AxisAlignedBox& b) const {
    Interval out;
    for (int i = 0; i < 3; ++i) out = intersect(out, slab(o[i], d[i], b.min[i], b.max[i]));
    return out;
  }

  Interval operator()(const VerticalCylinder& c) const {
    const Vec2 o2 = o.head<2>() - c.center_xy;
    const Vec2 d2 = d.head<2>();
    const double a = d2.squaredNorm();
    const double cc = o2.squaredNorm() - c.radius * c.radius;
    Interval radial;
    if (a < 1e-300) {
      if (cc > 0.0) return {kInf, -kInf};
    } else {
      const double b = o2.dot(d2);
      const double disc = b * b - a * cc;
      if (disc < 0.0) return {kInf, -kInf};
      const double root = std::sqrt(disc);
      radial = {(-b - root) / a, (-b + root) / a};
    }
    return intersect(radial, slab(o.z(), d.z(), c.z_min, c.z_max));
  }
};

}  // namespace

double wrap_yaw(double angle) {
  if (!std::isfinite(angle)) throw InvalidInput("wrap_yaw: non-finite angle");
  if (angle >= -kPi && angle < kPi) return angle;
  double r = std::fmod(angle + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  // fmod can land exactly on +pi after the shift back for inputs just below -pi.
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

Rigid3 Pose4D::transform() const {
  Rigid3 t = Rigid3::Identity();
  t.translate(position);
  t.rotate(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return t;
}

void validate(const Primitive& primitive) {
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          if (!finite(p.center) || !std::isfinite(p.radius) || p.radius <= 0.0)
            throw InvalidInput("sphere: invalid center or radius");
        } else if constexpr (std::is_same_v<T, AxisAlignedBox>) {
          if (!finite(p.min) || !finite(p.max) || !(p.min.array() < p.max.array()).all())
            throw InvalidInput("box: requires finite min < max componentwise");
        } else {
          if (!p.center_xy.allFinite() || !std::isfinite(p.radius) || p.radius <= 0.0 ||
              !std::isfinite(p.z_min) || !std::isfinite(p.z_max) || !(p.z_min < p.z_max))
            throw InvalidInput("cylinder: invalid parameters");
        }
      },
      primitive);
}

double signed_distance(const Primitive& primitive, const Vec3& point) {
  return std::visit(SdfVisitor{point}, primitive);
}

double signed_distance(std::span<const Primitive> world, const Vec3& point) {
  double best = kInf;
  for (const auto& p : world) best = std::min(best, signed_distance(p, point));
  return best;
}

std::optional<std::pair<double, double>> ray_interval(const Primitive& primitive, const Vec3& origin,
                                                      const Vec3& dir) {
  const Interval iv = std::visit(RayVisitor{origin, dir}, primitive);
  if (iv.empty()) return std::nullopt;
  return std::make_pair(iv.lo, iv.hi);
}

std::optional<double> ray_cast(std::span<const Primitive> world, const Vec3& origin, const Vec3& dir,
                               double max_range) {
  if (std::abs(dir.norm() - 1.0) > 1e-9) throw InvalidInput("ray_cast: direction must be unit length");
  double best = kInf;
  for (const auto& p : world) {
    const Interval iv = std::visit(RayVisitor{origin, dir}, p);
    if (iv.empty()) continue;
    double t = kInf;
    if (iv.lo > 0.0)
      t = iv.lo;
    else if (iv.hi > 0.0)
      t = iv.hi;
    best = std::min(best, t);
  }
  if (best <= max_range) return best;
  return std::nullopt;
}

Eigen::Matrix3d optical_to_body() {
  Eigen::Matrix3d r;
  // columns: optical x, y, z expressed in body axes
  r << 0.0, 0.0, 1.0,
      -1.0, 0.0, 0.0,
       0.0, -1.0, 0.0;
  return r;
}

Rigid3 CameraModel::default_mount() {
  Rigid3 t = Rigid3::Identity();
  t.translate(Vec3(0.1, 0.0, 0.0));
  t.rotate(optical_to_body());
  return t;
}

void validate(const CameraModel& c) {
  if (c.width <= 0 || c.height <= 0) throw InvalidInput("camera: image size must be positive");
  if (!(c.fx > 0.0) || !(c.fy > 0.0)) throw InvalidInput("camera: focal lengths must be positive");
  if (!std::isfinite(c.cx) || !std::isfinite(c.cy)) throw InvalidInput("camera: principal point");
  if (!(c.min_range > 0.0) || !(c.min_range < c.max_range) || !std::isfinite(c.max_range))
    throw InvalidInput("camera: requires 0 < min_range < max_range");
}

Vec3 pixel_to_camera_ray(const CameraModel& camera, double u, double v) {
  if (!(u >= 0.0 && u < camera.width && v >= 0.0 && v < camera.height))
    throw InvalidInput("pixel_to_camera_ray: pixel out of bounds");
  return Vec3((u - camera.cx) / camera.fx, (v - camera.cy) / camera.fy, 1.0).normalized();
}

Vec2 project(const CameraModel& camera, const Vec3& p) {
  return Vec2(camera.fx * p.x() / p.z() + camera.cx, camera.fy * p.y() / p.z() + camera.cy);
}

Rigid3 camera_pose(const Pose4D& pose, const CameraModel& camera) {
  return pose.transform() * camera.body_to_camera;
}

}  // namespace aerialnav
