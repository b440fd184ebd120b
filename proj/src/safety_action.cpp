#include "aerialnav/safety_action.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace aerialnav {

namespace {

constexpr Eigen::Index kFrozen = 3;

struct RoundConflicts {
  std::vector<Conflict> conflicts;          // owners in front of the surface
  std::vector<Eigen::Index> penetrating;    // owners behind it, ascending
};

// Control-point and dense-sample conflicts, both attributed to free control
// points. Dense samples catch segments that pass between control points.
RoundConflicts collect_conflicts(const BSpline& traj, const SurfaceModel& surface, double s_clear) {
  const auto& q = traj.control_points();
  const Eigen::Index m = q.cols();
  std::map<Eigen::Index, Conflict> nearest;
  std::vector<bool> behind(static_cast<std::size_t>(m), false);

  auto note = [&](Eigen::Index owner, const Vec3& x) {
    if (surface.behind_surface(x)) {
      behind[static_cast<std::size_t>(owner)] = true;
      return;
    }
    const auto hit = surface.grid().nearest(x, s_clear);
    if (!hit || hit->distance >= s_clear) return;
    const Vec3& p = surface.grid().points()[hit->index];
    const double d = (q.col(owner) - p).norm();
    auto it = nearest.find(owner);
    if (it == nearest.end() || d < it->second.distance) nearest[owner] = Conflict{owner, p, d};
  };

  for (const auto& c : detect_conflicts(traj, surface.grid(), s_clear)) note(c.control_index, q.col(c.control_index));
  for (Eigen::Index i = kFrozen; i <= m - 1 - kFrozen; ++i)
    if (surface.behind_surface(q.col(i))) behind[static_cast<std::size_t>(i)] = true;

  const double sample_dt = traj.knot_span() / 8.0;
  const double duration = traj.duration();
  for (double t = 0.0; t <= duration; t += sample_dt) {
    const Eigen::Index seg = std::min<Eigen::Index>(static_cast<Eigen::Index>(t / traj.knot_span()), m - 4);
    const double u = t / traj.knot_span() - static_cast<double>(seg);
    // Control point with the largest basis weight on this sample.
    const Eigen::Index owner = std::clamp<Eigen::Index>(seg + (u < 0.5 ? 1 : 2), kFrozen, m - 1 - kFrozen);
    if (owner < kFrozen || owner > m - 1 - kFrozen) continue;
    note(owner, evaluate(traj, t).position);
  }

  RoundConflicts out;
  for (Eigen::Index i = kFrozen; i <= m - 1 - kFrozen; ++i) {
    if (behind[static_cast<std::size_t>(i)]) {
      out.penetrating.push_back(i);
    } else if (auto it = nearest.find(i); it != nearest.end()) {
      out.conflicts.push_back(it->second);
    }
  }
  return out;
}

void freeze_boundary(ControlPoints<double>& g) {
  g.leftCols(kFrozen).setZero();
  g.rightCols(kFrozen).setZero();
}

// Gradient descent with Armijo backtracking over the free control points.
void optimize(BSpline& traj, std::span<const AnchorPair> anchors, const KinematicLimits& limits,
              const RefineConfig& config, RefineStats& stats) {
  ControlPoints<double> q = traj.control_points();
  const double dt = traj.knot_span();
  auto eval = total_cost_and_grad<double>(q, anchors, dt, limits, config);
  freeze_boundary(eval.gradient);

  std::vector<double> trace{eval.cost};
  double step = config.armijo.init_step;
  for (int it = 0; it < config.max_iters; ++it) {
    if (eval.gradient.cwiseAbs().maxCoeff() < config.grad_tol) break;
    const double g2 = eval.gradient.squaredNorm();
    bool accepted = false;
    ControlPoints<double> trial;
    CostGradient<double> next;
    for (int ls = 0; ls < 80; ++ls) {
      trial = q - step * eval.gradient;
      next = total_cost_and_grad<double>(trial, anchors, dt, limits, config);
      if (next.cost <= eval.cost - config.armijo.c * step * g2) {
        accepted = true;
        break;
      }
      step *= config.armijo.shrink;
    }
    if (!accepted) break;
    freeze_boundary(next.gradient);
    const double decrease = (eval.cost - next.cost) / std::max(std::abs(eval.cost), 1e-300);
    q = std::move(trial);
    eval = std::move(next);
    trace.push_back(eval.cost);
    ++stats.iterations;
    if (decrease < config.rel_cost_tol) break;
    step = std::min(config.armijo.init_step, 2.0 * step);
  }
  traj.control_points() = q;
  stats.final_cost = eval.cost;
  stats.cost_traces.push_back(std::move(trace));
}

}  // namespace

void RefineConfig::validate() const {
  if (!(s_min > 0.0 && s_min < s_clear)) throw InvalidInput("RefineConfig: requires 0 < s_min < s_clear");
  if (weights.smoothness < 0.0 || weights.collision < 0.0 || weights.feasibility < 0.0)
    throw InvalidInput("RefineConfig: weights must be non-negative");
  if (max_iters < 0 || max_outer_rounds < 1) throw InvalidInput("RefineConfig: iteration limits");
  if (!(armijo.init_step > 0.0) || !(armijo.shrink > 0.0 && armijo.shrink < 1.0) || !(armijo.c > 0.0))
    throw InvalidInput("RefineConfig: line-search parameters");
}

std::string to_string(InfeasibleReason reason) {
  switch (reason) {
    case InfeasibleReason::None: return "none";
    case InfeasibleReason::NoFreeControlPoints: return "no_free_control_points";
    case InfeasibleReason::ClearanceViolated: return "clearance_violated";
    case InfeasibleReason::BehindSurface: return "behind_surface";
    case InfeasibleReason::ConflictRecurred: return "conflict_recurred";
  }
  return "unknown";
}

VerifyResult verify_trajectory(const BSpline& traj, const SurfaceModel& surface, double s_min, double from) {
  VerifyResult out;
  if (surface.empty()) return out;
  const double duration = traj.duration();
  from = std::clamp(from, 0.0, duration);
  const auto d = derivative_control_points(traj);
  const double v_peak = d.velocity.colwise().norm().maxCoeff();
  // |dx/dt| <= v_peak, so this time step bounds arc length per step by 1 cm.
  const double step = v_peak > 0.0 ? 0.01 / v_peak : duration + 1.0;
  const auto count = static_cast<std::size_t>(std::ceil((duration - from) / step));
  for (std::size_t k = 0; k <= count; ++k) {
    const double t = std::min(from + static_cast<double>(k) * step, duration);
    const Vec3 x = evaluate(traj, t).position;
    ++out.samples;
    if (const auto hit = surface.grid().nearest(x, s_min); hit && hit->distance < s_min) {
      out.ok = false;
      out.reason = InfeasibleReason::ClearanceViolated;
      return out;
    }
    if (surface.behind_surface(x)) {
      out.ok = false;
      out.reason = InfeasibleReason::BehindSurface;
      return out;
    }
  }
  return out;
}

RefineResult refine(const BSpline& traj, const LocalObstacleCloud& cloud, const RefineConfig& config,
                    const KinematicLimits& limits) {
  config.validate();
  RefineResult result;
  const SurfaceModel surface(cloud, config.s_clear, config.occlusion_radius);
  BSpline current = traj;
  const Eigen::Index m = current.size();
  AnchorSet anchors(cloud.voxel_size);

  {
    auto initial = total_cost_and_grad<double>(current.control_points(), {}, current.knot_span(), limits, config);
    result.stats.initial_cost = result.stats.final_cost = initial.cost;
  }

  if (!surface.empty()) {
    for (int round = 0; round < config.max_outer_rounds; ++round) {
      const auto found = collect_conflicts(current, surface, config.s_clear);
      if (found.conflicts.empty() && found.penetrating.empty()) break;
      if (m - 2 * kFrozen <= 0) {
        result.reason = InfeasibleReason::NoFreeControlPoints;
        return result;
      }
      for (const auto& a : build_anchors(found.conflicts, current.control_points(), cloud.voxel_size))
        anchors.insert(a);
      for (const auto& a : build_escape_anchors(current.control_points(), found.penetrating, surface, config.s_clear)) {
        if (anchors.insert(a)) ++result.stats.escape_anchors;
      }
      optimize(current, anchors.anchors(), limits, config, result.stats);
      ++result.stats.outer_rounds;
    }
  }
  result.stats.anchors = anchors.size();

  BSpline timed = reallocate_time(current, limits.v_max, limits.a_max);
  const auto check = verify_trajectory(timed, surface, config.s_min);
  if (!check.ok) {
    result.reason = check.reason;
    return result;
  }
  if (!surface.empty() && !detect_conflicts(timed, surface.grid(), config.s_min).empty()) {
    result.reason = InfeasibleReason::ConflictRecurred;
    return result;
  }
  result.trajectory = std::move(timed);
  return result;
}

Command sample_command(const BSpline& traj, double t, double desired_yaw, double previous_yaw, double yaw_rate_max,
                       double dt) {
  if (!(dt > 0.0)) throw InvalidInput("sample_command: dt must be positive");
  const auto s = evaluate(traj, t);
  Command cmd;
  cmd.position = s.position;
  if (t > traj.duration()) {
    cmd.velocity.setZero();
    cmd.acceleration.setZero();
  } else {
    cmd.velocity = s.velocity;
    cmd.acceleration = s.acceleration;
  }
  const double error = wrap_yaw(desired_yaw - previous_yaw);
  const double max_step = yaw_rate_max * dt;
  cmd.yaw = wrap_yaw(previous_yaw + std::clamp(error, -max_step, max_step));
  cmd.timestamp = traj.start_time() + t;
  return cmd;
}

}  // namespace aerialnav
