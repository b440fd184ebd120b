#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "aerialnav/errors.hpp"
#include "aerialnav/world.hpp"

namespace aerialnav {

template <typename Scalar>
using ControlPoints = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

/// Uniform cubic B-spline in 3D. Local time runs over [0, (M - 3) * knot_span];
/// start_time anchors it to the episode clock.
template <typename Scalar>
class UniformBSpline {
 public:
  static constexpr int kDegree = 3;
  static constexpr Eigen::Index kMinControlPoints = 6;

  UniformBSpline() : points_(ControlPoints<Scalar>::Zero(3, kMinControlPoints)) {}

  UniformBSpline(ControlPoints<Scalar> points, Scalar knot_span, Scalar start_time = Scalar(0))
      : points_(std::move(points)), knot_span_(knot_span), start_time_(start_time) {
    if (points_.cols() < kMinControlPoints) throw InvalidInput("UniformBSpline: needs at least 6 control points");
    if (!(knot_span_ > Scalar(0))) throw InvalidInput("UniformBSpline: knot span must be positive");
  }

  const ControlPoints<Scalar>& control_points() const { return points_; }
  ControlPoints<Scalar>& control_points() { return points_; }
  Eigen::Index size() const { return points_.cols(); }
  Scalar knot_span() const { return knot_span_; }
  Scalar start_time() const { return start_time_; }
  void set_start_time(Scalar t) { start_time_ = t; }
  Scalar duration() const { return Scalar(points_.cols() - kDegree) * knot_span_; }
  Scalar end_time() const { return start_time_ + duration(); }

 private:
  ControlPoints<Scalar> points_;
  Scalar knot_span_ = Scalar(0.1);
  Scalar start_time_ = Scalar(0);
};

using BSpline = UniformBSpline<double>;

template <typename Scalar>
struct SplineSample {
  Eigen::Matrix<Scalar, 3, 1> position;
  Eigen::Matrix<Scalar, 3, 1> velocity;
  Eigen::Matrix<Scalar, 3, 1> acceleration;
  bool clamped = false;
};

template <typename Scalar>
struct DerivativeControlPoints {
  ControlPoints<Scalar> velocity;      // V_i = (Q_{i+1} - Q_i) / dt, M - 1 columns
  ControlPoints<Scalar> acceleration;  // A_i = (V_{i+1} - V_i) / dt, M - 2 columns
};

/// Evaluates position and the first two derivatives at local time t. Times
/// outside [0, duration] are clamped and flagged.
template <typename Scalar>
SplineSample<Scalar> evaluate(const UniformBSpline<Scalar>& spline, Scalar t) {
  using std::floor;
  SplineSample<Scalar> out;
  const Scalar duration = spline.duration();
  if (t < Scalar(0) || t > duration) {
    out.clamped = true;
    t = std::clamp(t, Scalar(0), duration);
  }
  const auto& q = spline.control_points();
  const Scalar dt = spline.knot_span();
  const Eigen::Index segments = q.cols() - 3;
  Eigen::Index j = static_cast<Eigen::Index>(floor(t / dt));
  j = std::clamp<Eigen::Index>(j, 0, segments - 1);
  const Scalar u = t / dt - Scalar(j);
  const Scalar u2 = u * u;
  const Scalar u3 = u2 * u;
  const Scalar w = Scalar(1) - u;

  out.position = (w * w * w * q.col(j) + (Scalar(3) * u3 - Scalar(6) * u2 + Scalar(4)) * q.col(j + 1) +
                  (Scalar(-3) * u3 + Scalar(3) * u2 + Scalar(3) * u + Scalar(1)) * q.col(j + 2) +
                  u3 * q.col(j + 3)) /
                 Scalar(6);

  const auto v0 = (q.col(j + 1) - q.col(j)) / dt;
  const auto v1 = (q.col(j + 2) - q.col(j + 1)) / dt;
  const auto v2 = (q.col(j + 3) - q.col(j + 2)) / dt;
  out.velocity = Scalar(0.5) * (w * w * v0 + (Scalar(-2) * u2 + Scalar(2) * u + Scalar(1)) * v1 + u2 * v2);
  out.acceleration = w * (v1 - v0) / dt + u * (v2 - v1) / dt;
  return out;
}

template <typename Scalar>
DerivativeControlPoints<Scalar> derivative_control_points(const UniformBSpline<Scalar>& spline) {
  const auto& q = spline.control_points();
  const Scalar dt = spline.knot_span();
  const Eigen::Index m = q.cols();
  DerivativeControlPoints<Scalar> out;
  out.velocity = (q.rightCols(m - 1) - q.leftCols(m - 1)) / dt;
  out.acceleration = (q.rightCols(m - 2) - Scalar(2) * q.middleCols(1, m - 2) + q.leftCols(m - 2)) / (dt * dt);
  return out;
}

/// Uniform knot scaling: dt' = k * dt with
/// k = max(1, max|V|/v_max, sqrt(max|A|/a_max)). Control points are kept.
template <typename Scalar>
UniformBSpline<Scalar> reallocate_time(const UniformBSpline<Scalar>& spline, Scalar v_max, Scalar a_max) {
  using std::sqrt;
  if (!(v_max > Scalar(0)) || !(a_max > Scalar(0))) throw InvalidInput("reallocate_time: limits must be positive");
  const auto d = derivative_control_points(spline);
  const Scalar v_peak = d.velocity.colwise().norm().maxCoeff();
  const Scalar a_peak = d.acceleration.colwise().norm().maxCoeff();
  Scalar k = std::max({Scalar(1), v_peak / v_max, sqrt(a_peak / a_max)});
  // Round-off guard so that a second pass is the identity.
  if (k <= Scalar(1) + Scalar(1e-12)) return spline;
  return UniformBSpline<Scalar>(spline.control_points(), k * spline.knot_span(), spline.start_time());
}

/// Straight-line reference from a kinematic state to a target: the first three
/// control points reproduce (position, velocity, acceleration) at t = 0, the
/// last three coincide at the target (full stop), and interior points are
/// evenly spaced so the nominal speed is 0.6 * v_max.
inline BSpline init_straight(const Vec3& position, const Vec3& velocity, const Vec3& acceleration,
                             const Vec3& target, const KinematicLimits& limits, double knot_span,
                             double start_time = 0.0) {
  if (!(knot_span > 0.0)) throw InvalidInput("init_straight: knot span must be positive");
  if (!target.allFinite()) throw InvalidInput("init_straight: target must be finite");
  const double dt = knot_span;
  const Vec3 q1 = position - acceleration * dt * dt / 6.0;
  const Vec3 q0 = q1 + acceleration * dt * dt / 2.0 - velocity * dt;
  const Vec3 q2 = q1 + acceleration * dt * dt / 2.0 + velocity * dt;

  const bool hover = (target - position).norm() < 1e-12;
  Eigen::Index interior = 0;
  if (!hover) {
    const double spacing = 0.6 * limits.v_max * dt;
    const double length = (target - q2).norm();
    interior = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(length / spacing)) - 1);
  }

  ControlPoints<double> q(3, 6 + interior);
  q.col(0) = q0;
  q.col(1) = q1;
  q.col(2) = q2;
  for (Eigen::Index k = 1; k <= interior; ++k)
    q.col(2 + k) = q2 + (target - q2) * (static_cast<double>(k) / static_cast<double>(interior + 1));
  q.rightCols(3).colwise() = target;
  return BSpline(std::move(q), dt, start_time);
}

inline BSpline init_straight(const SimState& start, const Vec3& start_accel, const Vec3& target,
                             const KinematicLimits& limits, double knot_span) {
  return init_straight(start.pose.position, start.velocity, start_accel, target, limits, knot_span, start.time);
}

}  // namespace aerialnav
