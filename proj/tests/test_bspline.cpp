#include <gtest/gtest.h>

#include <random>

#include "aerialnav/bspline.hpp"

using namespace aerialnav;

namespace {

ControlPoints<double> random_points(std::mt19937_64& rng, Eigen::Index m, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ControlPoints<double> q(3, m);
  for (Eigen::Index i = 0; i < m; ++i) q.col(i) = Vec3(u(rng), u(rng), u(rng));
  return q;
}

}  // namespace

TEST(BSpline, RejectsTooFewPointsOrBadSpan) {
  EXPECT_THROW(BSpline(ControlPoints<double>::Zero(3, 5), 0.1), InvalidInput);
  EXPECT_THROW(BSpline(ControlPoints<double>::Zero(3, 6), 0.0), InvalidInput);
  EXPECT_NO_THROW(BSpline(ControlPoints<double>::Zero(3, 6), 0.1));
}

TEST(BSpline, DurationAndClampFlag) {
  const BSpline s(ControlPoints<double>::Zero(3, 8), 0.25, 3.0);
  EXPECT_DOUBLE_EQ(s.duration(), 1.25);
  EXPECT_DOUBLE_EQ(s.end_time(), 4.25);
  EXPECT_FALSE(evaluate(s, 1.25).clamped);
  EXPECT_TRUE(evaluate(s, 1.3).clamped);
  EXPECT_TRUE(evaluate(s, -0.1).clamped);
}

TEST(BSpline, ReproducesConstantsAndLines) {
  const Vec3 c(1.5, -2.0, 0.25), d(0.3, 0.1, -0.2);
  const double dt = 0.2;
  ControlPoints<double> constant(3, 9), line(3, 9);
  for (int i = 0; i < 9; ++i) {
    constant.col(i) = c;
    line.col(i) = c + i * d;
  }
  const BSpline sc(constant, dt), sl(line, dt);
  for (int k = 0; k <= 120; ++k) {
    const double t = sc.duration() * k / 120.0;
    const auto a = evaluate(sc, t);
    EXPECT_LE((a.position - c).norm(), 1e-12);
    EXPECT_LE(a.velocity.norm(), 1e-12);
    const auto b = evaluate(sl, t);
    EXPECT_LE((b.position - (c + (1.0 + t / dt) * d)).norm(), 1e-12);
    EXPECT_LE((b.velocity - d / dt).norm(), 1e-12);
    EXPECT_LE(b.acceleration.norm(), 1e-9);
  }
}

TEST(BSpline, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const BSpline s(random_points(rng, 10), 0.3);
    for (int k = 1; k < 50; ++k) {
      const double t = s.duration() * (k + 0.37) / 51.0;
      const auto e = evaluate(s, t);
      const Vec3 fd_v = (evaluate(s, t + h).position - evaluate(s, t - h).position) / (2 * h);
      const Vec3 fd_a = (evaluate(s, t + h).velocity - evaluate(s, t - h).velocity) / (2 * h);
      EXPECT_LE((fd_v - e.velocity).norm(), 1e-5 * std::max(1.0, e.velocity.norm()));
      EXPECT_LE((fd_a - e.acceleration).norm(), 1e-5 * std::max(1.0, e.acceleration.norm()));
    }
  }
}

TEST(BSpline, PositionIsContinuousAcrossKnots) {
  std::mt19937_64 rng(12);
  const BSpline s(random_points(rng, 9), 0.5);
  for (int j = 1; j < 6; ++j) {
    const double t = 0.5 * j;
    EXPECT_LE((evaluate(s, t - 1e-10).position - evaluate(s, t + 1e-10).position).norm(), 1e-8);
    EXPECT_LE((evaluate(s, t - 1e-10).velocity - evaluate(s, t + 1e-10).velocity).norm(), 1e-8);
  }
}

TEST(BSpline, DerivativeControlPointsBoundSampledDerivatives) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const BSpline s(random_points(rng, 12), 0.2);
    const auto d = derivative_control_points(s);
    ASSERT_EQ(d.velocity.cols(), 11);
    ASSERT_EQ(d.acceleration.cols(), 10);
    const double vmax = d.velocity.colwise().norm().maxCoeff();
    const double amax = d.acceleration.colwise().norm().maxCoeff();
    for (int k = 0; k <= 500; ++k) {
      const auto e = evaluate(s, s.duration() * k / 500.0);
      EXPECT_LE(e.velocity.norm(), vmax * (1 + 1e-12));
      EXPECT_LE(e.acceleration.norm(), amax * (1 + 1e-12));
    }
  }
}

TEST(ReallocateTime, BringsHullWithinLimitsAndIsIdempotent) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const BSpline s(random_points(rng, 10, 5.0), 0.1);
    const BSpline r = reallocate_time(s, 2.0, 3.0);
    const auto d = derivative_control_points(r);
    EXPECT_LE(d.velocity.colwise().norm().maxCoeff(), 2.0 * (1 + 1e-9));
    EXPECT_LE(d.acceleration.colwise().norm().maxCoeff(), 3.0 * (1 + 1e-9));
    EXPECT_EQ(r.control_points(), s.control_points());
    EXPECT_GE(r.knot_span(), s.knot_span());
    EXPECT_DOUBLE_EQ(reallocate_time(r, 2.0, 3.0).knot_span(), r.knot_span());
  }
  EXPECT_THROW(reallocate_time(BSpline(ControlPoints<double>::Zero(3, 6), 0.1), 0.0, 1.0), InvalidInput);
}

TEST(ReallocateTime, FeasibleSplineIsUnchanged) {
  ControlPoints<double> q = ControlPoints<double>::Zero(3, 7);
  for (int i = 0; i < 7; ++i) q(0, i) = 0.01 * i;
  const BSpline s(q, 0.5);
  EXPECT_DOUBLE_EQ(reallocate_time(s, 2.0, 3.0).knot_span(), 0.5);
}

TEST(InitStraight, MatchesBoundaryStateAndStopsAtTarget) {
  const Vec3 p(1, 2, 1.5), v(0.5, -0.2, 0.1), a(0.3, 0.0, -0.4), target(7, 3, 1.5);
  const KinematicLimits lim;
  const BSpline s = init_straight(p, v, a, target, lim, 0.4, 2.0);
  const auto e0 = evaluate(s, 0.0);
  EXPECT_LE((e0.position - p).norm(), 1e-12);
  EXPECT_LE((e0.velocity - v).norm(), 1e-12);
  EXPECT_LE((e0.acceleration - a).norm(), 1e-12);
  const auto e1 = evaluate(s, s.duration());
  EXPECT_LE((e1.position - target).norm(), 1e-12);
  EXPECT_LE(e1.velocity.norm(), 1e-12);
  EXPECT_LE(e1.acceleration.norm(), 1e-12);
  EXPECT_DOUBLE_EQ(s.start_time(), 2.0);
  // Interior spacing does not exceed the nominal 0.6 * v_max * dt.
  const auto& q = s.control_points();
  for (Eigen::Index i = 3; i + 3 < q.cols(); ++i) EXPECT_LE((q.col(i) - q.col(i - 1)).norm(), 0.6 * 2.0 * 0.4 + 1e-9);
}

TEST(InitStraight, HoverHasMinimumSize) {
  const BSpline s = init_straight(Vec3(1, 1, 1), Vec3::Zero(), Vec3::Zero(), Vec3(1, 1, 1), KinematicLimits{}, 0.4);
  EXPECT_EQ(s.size(), BSpline::kMinControlPoints);
  EXPECT_THROW(init_straight(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3(std::nan(""), 0, 0), KinematicLimits{}, 0.4),
               InvalidInput);
}
