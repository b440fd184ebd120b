#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerialnav/bspline.hpp"
#include "aerialnav/perception.hpp"
#include "aerialnav/world.hpp"

namespace aerialnav {

template <typename Scalar>
struct CostGradient {
  Scalar cost = Scalar(0);
  ControlPoints<Scalar> gradient;
};

/// Anchored repulsion: for anchor (p, v) on Q_i, d = (Q_i - p) . v and the
/// penalty (s_clear - d)^3 is active while d < s_clear.
template <typename Scalar>
CostGradient<Scalar> collision_cost_and_grad(const ControlPoints<Scalar>& q, std::span<const AnchorPair> anchors,
                                             Scalar s_clear) {
  CostGradient<Scalar> out{Scalar(0), ControlPoints<Scalar>::Zero(3, q.cols())};
  for (const auto& a : anchors) {
    const Eigen::Matrix<Scalar, 3, 1> p = a.anchor.template cast<Scalar>();
    const Eigen::Matrix<Scalar, 3, 1> v = a.direction.template cast<Scalar>();
    const Scalar d = (q.col(a.owner_index) - p).dot(v);
    if (d >= s_clear) continue;
    const Scalar gap = s_clear - d;
    out.cost += gap * gap * gap;
    out.gradient.col(a.owner_index) -= Scalar(3) * gap * gap * v;
  }
  return out;
}

/// Sum of squared second differences.
template <typename Scalar>
CostGradient<Scalar> smoothness_cost_and_grad(const ControlPoints<Scalar>& q) {
  CostGradient<Scalar> out{Scalar(0), ControlPoints<Scalar>::Zero(3, q.cols())};
  for (Eigen::Index i = 0; i + 2 < q.cols(); ++i) {
    const Eigen::Matrix<Scalar, 3, 1> r = q.col(i + 2) - Scalar(2) * q.col(i + 1) + q.col(i);
    out.cost += r.squaredNorm();
    out.gradient.col(i) += Scalar(2) * r;
    out.gradient.col(i + 1) -= Scalar(4) * r;
    out.gradient.col(i + 2) += Scalar(2) * r;
  }
  return out;
}

/// Cubic hinge on squared derivative control-point norms.
template <typename Scalar>
CostGradient<Scalar> feasibility_cost_and_grad(const ControlPoints<Scalar>& q, Scalar dt, Scalar v_max,
                                               Scalar a_max) {
  CostGradient<Scalar> out{Scalar(0), ControlPoints<Scalar>::Zero(3, q.cols())};
  const Scalar v2 = v_max * v_max;
  const Scalar a2 = a_max * a_max;
  for (Eigen::Index i = 0; i + 1 < q.cols(); ++i) {
    const Eigen::Matrix<Scalar, 3, 1> vel = (q.col(i + 1) - q.col(i)) / dt;
    const Scalar h = vel.squaredNorm() - v2;
    if (h <= Scalar(0)) continue;
    out.cost += h * h * h;
    const Eigen::Matrix<Scalar, 3, 1> g = Scalar(6) * h * h * vel / dt;
    out.gradient.col(i + 1) += g;
    out.gradient.col(i) -= g;
  }
  const Scalar dt2 = dt * dt;
  for (Eigen::Index i = 0; i + 2 < q.cols(); ++i) {
    const Eigen::Matrix<Scalar, 3, 1> acc = (q.col(i + 2) - Scalar(2) * q.col(i + 1) + q.col(i)) / dt2;
    const Scalar h = acc.squaredNorm() - a2;
    if (h <= Scalar(0)) continue;
    out.cost += h * h * h;
    const Eigen::Matrix<Scalar, 3, 1> g = Scalar(6) * h * h * acc / dt2;
    out.gradient.col(i) += g;
    out.gradient.col(i + 1) -= Scalar(2) * g;
    out.gradient.col(i + 2) += g;
  }
  return out;
}

struct RefineWeights {
  double smoothness = 1.0;
  double collision = 100.0;
  double feasibility = 10.0;
};

struct ArmijoParams {
  double init_step = 0.1;
  double shrink = 0.5;
  double c = 1e-4;
};

struct RefineConfig {
  double s_clear = 0.4;  // soft margin shaping the optimum
  double s_min = 0.2;    // hard margin gating acceptance
  RefineWeights weights;
  int max_iters = 200;
  int max_outer_rounds = 5;
  double grad_tol = 1e-4;
  double rel_cost_tol = 1e-8;
  ArmijoParams armijo;
  // Samples farther than this from every obstacle point are never treated as
  // lying behind an observed surface.
  double occlusion_radius = 0.8;

  void validate() const;
};

template <typename Scalar>
CostGradient<Scalar> total_cost_and_grad(const ControlPoints<Scalar>& q, std::span<const AnchorPair> anchors,
                                         Scalar dt, const KinematicLimits& limits, const RefineConfig& config) {
  const auto s = smoothness_cost_and_grad(q);
  const auto c = collision_cost_and_grad(q, anchors, Scalar(config.s_clear));
  const auto f = feasibility_cost_and_grad(q, dt, Scalar(limits.v_max), Scalar(limits.a_max));
  const Scalar ws(config.weights.smoothness), wc(config.weights.collision), wf(config.weights.feasibility);
  return {ws * s.cost + wc * c.cost + wf * f.cost, ws * s.gradient + wc * c.gradient + wf * f.gradient};
}

struct RefineStats {
  int outer_rounds = 0;
  int iterations = 0;
  std::size_t anchors = 0;
  std::size_t escape_anchors = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  // Accepted-step cost trace of every inner optimisation, round after round.
  std::vector<std::vector<double>> cost_traces;
};

enum class InfeasibleReason {
  None,
  NoFreeControlPoints,
  ClearanceViolated,
  BehindSurface,
  ConflictRecurred,
};

std::string to_string(InfeasibleReason reason);

struct RefineResult {
  std::optional<BSpline> trajectory;  // empty means Infeasible
  InfeasibleReason reason = InfeasibleReason::None;
  RefineStats stats;

  bool feasible() const { return trajectory.has_value(); }
};

/// Outcome of the dense acceptance check.
struct VerifyResult {
  bool ok = true;
  InfeasibleReason reason = InfeasibleReason::None;
  double min_distance = 0.0;
  std::size_t samples = 0;
};

/// Dense check over local times [from, duration]: consecutive samples are at
/// most 1 cm of arc apart; each must stay s_min away from every obstacle
/// sample and not lie behind an observed surface.
VerifyResult verify_trajectory(const BSpline& traj, const SurfaceModel& surface, double s_min, double from = 0.0);

/// Conditional refinement: nothing is optimised unless the trajectory conflicts
/// with the cloud. Never returns a trajectory that failed verification.
RefineResult refine(const BSpline& traj, const LocalObstacleCloud& cloud, const RefineConfig& config,
                    const KinematicLimits& limits);

/// Command at local time t; past the end it holds the terminal position with
/// zero velocity. Yaw slews from previous_yaw toward desired_yaw.
Command sample_command(const BSpline& traj, double t, double desired_yaw, double previous_yaw, double yaw_rate_max,
                       double dt);

}  // namespace aerialnav
