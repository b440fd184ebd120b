#include "aerialnav/scenario_library.hpp"

#include <cmath>
#include <random>

#include "aerialnav/errors.hpp"

namespace aerialnav {

namespace {

constexpr double kAltitude = 1.5;

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double sign() { return integer(0, 1) == 0 ? -1.0 : 1.0; }

 private:
  std::mt19937_64 rng_;
};

ScenarioSpec base(const std::string& name, std::uint64_t seed, const std::string& instruction) {
  ScenarioSpec s;
  s.name = name + "_" + std::to_string(seed);
  s.seed = seed;
  s.start = Pose4D(Vec3(0.0, 0.0, kAltitude), 0.0);
  s.instruction = instruction;
  s.bounds = AxisAlignedBox{Vec3(-15.0, -15.0, 0.0), Vec3(20.0, 15.0, 5.0)};
  return s;
}

Goal goal_at(const Vec3& p, double yaw) {
  Goal g;
  g.position = p;
  g.yaw = wrap_yaw(yaw);
  return g;
}

double clearance_needed(const ScenarioSpec& s) { return s.drone_radius + 0.4; }

bool endpoints_clear(const ScenarioSpec& s, const Primitive& candidate) {
  const double need = clearance_needed(s) + 0.2;
  if (signed_distance(candidate, s.start.position) < need) return false;
  for (const auto& g : s.goals)
    if (signed_distance(candidate, g.position) < need) return false;
  return true;
}

ScenarioSpec empty(std::uint64_t seed) {
  Sampler r(seed);
  ScenarioSpec s = base("empty", seed, "Fly to the marked point in open space.");
  const double heading = r.uniform(-kPi, kPi);
  const double distance = r.uniform(4.0, 8.0);
  s.start.yaw = wrap_yaw(heading + r.uniform(-0.5, 0.5));
  s.goals.push_back(goal_at(s.start.position + distance * Vec3(std::cos(heading), std::sin(heading), 0.0) +
                                Vec3(0.0, 0.0, r.uniform(-0.5, 0.5)),
                            heading));
  return s;
}

ScenarioSpec corridor(std::uint64_t seed) {
  Sampler r(seed);
  ScenarioSpec s = base("corridor", seed, "Go down the corridor and stop at its end.");
  const double width = r.uniform(1.8, 2.4);
  const double length = r.uniform(7.0, 10.0);
  const double half = width / 2.0;
  const double thickness = 0.3;
  s.world.push_back(AxisAlignedBox{Vec3(1.0, half, 0.0), Vec3(1.0 + length, half + thickness, 3.0)});
  s.world.push_back(AxisAlignedBox{Vec3(1.0, -half - thickness, 0.0), Vec3(1.0 + length, -half, 3.0)});
  const double lateral = r.uniform(-0.15, 0.15) * width;
  s.goals.push_back(goal_at(Vec3(1.0 + length + 1.0, lateral, kAltitude + r.uniform(-0.3, 0.3)), 0.0));
  return s;
}

ScenarioSpec slalom(std::uint64_t seed) {
  Sampler r(seed);
  ScenarioSpec s = base("slalom", seed, "Weave between the posts to the far side.");
  const double first = r.sign();
  for (int i = 0; i < 3; ++i) {
    const double x = 2.5 + 2.5 * i + r.uniform(-0.3, 0.3);
    const double side = (i % 2 == 0 ? first : -first);
    const double radius = r.uniform(0.25, 0.4);
    s.world.push_back(VerticalCylinder{Vec2(x, side * r.uniform(0.0, 0.35)), radius, 0.0, 4.0});
  }
  s.goals.push_back(goal_at(Vec3(10.5, r.uniform(-0.5, 0.5), kAltitude), 0.0));
  return s;
}

ScenarioSpec long_horizon(std::uint64_t seed) {
  Sampler r(seed);
  ScenarioSpec s =
      base("long_horizon", seed, "Fly forward, turn left 90 degrees and continue, then turn left again to the last mark.");
  const double a = r.uniform(4.0, 6.0);
  const double b = r.uniform(3.0, 5.0);
  const double c = r.uniform(2.5, 4.0);
  const Vec3 g1(a, 0.0, kAltitude);
  const Vec3 g2(a, b, kAltitude + r.uniform(-0.3, 0.3));
  const Vec3 g3(a - c, b, kAltitude);
  s.goals.push_back(goal_at(g1, kPi / 2.0));
  s.goals.push_back(goal_at(g2, kPi));
  s.goals.push_back(goal_at(g3, kPi));
  // Posts beside each leg, clear of the straight segments.
  const Vec3 posts[] = {Vec3(a / 2.0, r.sign() * r.uniform(1.3, 2.0), 0.0),
                        Vec3(a + r.sign() * r.uniform(1.3, 2.0), b / 2.0, 0.0),
                        Vec3(a - c / 2.0, b + r.sign() * r.uniform(1.3, 2.0), 0.0)};
  for (const Vec3& p : posts) {
    const Primitive post = VerticalCylinder{p.head<2>(), r.uniform(0.25, 0.4), 0.0, 4.0};
    if (endpoints_clear(s, post)) s.world.push_back(post);
  }
  return s;
}

ScenarioSpec sphere_field(std::uint64_t seed) {
  Sampler r(seed);
  ScenarioSpec s = base("sphere_field", seed, "Cross the field of floating obstacles.");
  const double distance = r.uniform(7.0, 9.0);
  s.goals.push_back(goal_at(Vec3(distance, r.uniform(-1.0, 1.0), kAltitude), 0.0));
  const int count = r.integer(3, 6);
  for (int attempt = 0; attempt < 200 && static_cast<int>(s.world.size()) < count; ++attempt) {
    const Primitive sphere =
        Sphere{Vec3(r.uniform(1.5, distance - 1.5), r.uniform(-1.5, 1.5), kAltitude + r.uniform(-0.6, 0.6)),
               r.uniform(0.25, 0.5)};
    if (!endpoints_clear(s, sphere)) continue;
    bool overlaps = false;
    for (const auto& other : s.world)
      if (signed_distance(other, std::get<Sphere>(sphere).center) < std::get<Sphere>(sphere).radius + 0.3)
        overlaps = true;
    if (!overlaps) s.world.push_back(sphere);
  }
  return s;
}

ScenarioSpec single_sphere(std::uint64_t seed) {
  Sampler r(seed);
  ScenarioSpec s = base("single_sphere", seed, "Fly straight ahead past the obstacle.");
  const double distance = r.uniform(5.0, 7.0);
  s.goals.push_back(goal_at(Vec3(distance, 0.0, kAltitude), 0.0));
  s.world.push_back(Sphere{Vec3(r.uniform(2.2, distance - 2.2), r.uniform(-0.2, 0.2), kAltitude + r.uniform(-0.2, 0.2)),
                           r.uniform(0.3, 0.6)});
  return s;
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Empty: return "empty";
    case ScenarioKind::Corridor: return "corridor";
    case ScenarioKind::Slalom: return "slalom";
    case ScenarioKind::LongHorizon: return "long_horizon";
    case ScenarioKind::SphereField: return "sphere_field";
    case ScenarioKind::SingleSphere: return "single_sphere";
  }
  return "?";
}

ScenarioKind scenario_kind_from_string(const std::string& text) {
  for (ScenarioKind k : kAllScenarioKinds)
    if (to_string(k) == text) return k;
  throw InvalidInput("unknown scenario kind '" + text + "'");
}

ScenarioSpec make_scenario(ScenarioKind kind, std::uint64_t seed) {
  ScenarioSpec s;
  switch (kind) {
    case ScenarioKind::Empty: s = empty(seed); break;
    case ScenarioKind::Corridor: s = corridor(seed); break;
    case ScenarioKind::Slalom: s = slalom(seed); break;
    case ScenarioKind::LongHorizon: s = long_horizon(seed); break;
    case ScenarioKind::SphereField: s = sphere_field(seed); break;
    case ScenarioKind::SingleSphere: s = single_sphere(seed); break;
  }
  validate(s);
  return s;
}

}  // namespace aerialnav
