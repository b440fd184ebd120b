#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "aerialnav/datagen.hpp"
#include "aerialnav/scenario_library.hpp"

using namespace aerialnav;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aerialnav_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class HoldPolicy : public Policy {
 public:
  std::optional<NavDecision> decide(const Observation& obs) override {
    NavDecision d;
    d.waypoint = obs.pose.position;
    d.yaw = wrap_yaw(obs.pose.yaw);
    d.seq = obs.seq;
    return d;
  }
  std::string name() const override { return "hold"; }
};

}  // namespace

TEST(DeriveSeed, DistinctAndStable) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 7), derive_seed(42, 7));
  EXPECT_NE(derive_seed(42, 7), derive_seed(43, 7));
}

TEST(GenerateScenarios, ValidSeparatedAndReproducible) {
  const ScenarioSpec templ = make_scenario(ScenarioKind::SphereField, 9);
  const auto a = generate_scenarios(templ, 25, 123);
  const auto b = generate_scenarios(templ, 25, 123);
  ASSERT_EQ(a.size(), 25u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NO_THROW(validate(a[i]));
    EXPECT_EQ(serialize_scenario(a[i]), serialize_scenario(b[i]));
    EXPECT_GE(signed_distance(a[i].world, a[i].start.position), templ.drone_radius + 0.4);
    EXPECT_GE((a[i].goals[0].position - a[i].start.position).norm(), 2.0);
  }
  EXPECT_NE(serialize_scenario(a[0]), serialize_scenario(a[1]));
}

TEST(GenerateScenarios, ImpossibleTemplateIsReported) {
  ScenarioSpec templ = make_scenario(ScenarioKind::Empty, 1);
  templ.bounds = AxisAlignedBox{Vec3(0, 0, 0), Vec3(1, 1, 1)};
  templ.world = {AxisAlignedBox{Vec3(-1, -1, -1), Vec3(2, 2, 2)}};
  GenerationOptions opt;
  opt.max_attempts = 100;
  EXPECT_THROW(generate_scenarios(templ, 3, 1, opt), GenerationInfeasible);
  EXPECT_THROW(generate_scenarios(templ, 0, 1, opt), InvalidInput);
}

TEST(ComputeMetrics, PathLengthAndBruteForceClearance) {
  EpisodeLog log;
  ScenarioSpec s;
  s.world = {Sphere{Vec3(2, 2, 0), 0.5}, AxisAlignedBox{Vec3(-3, -3, 0), Vec3(-2, -2, 1)}};
  for (int i = 0; i <= 40; ++i) {
    FrameRecord f;
    f.time = 0.1 * i;
    f.pose = Pose4D(Vec3(0.1 * i, 0, 1), 0.0);
    log.frames.push_back(f);
  }
  log.outcome = Outcome::Success;
  log.end_time = 4.0;
  const Metrics m = compute_metrics(log, s);
  EXPECT_NEAR(m.path_length, 4.0, 1e-9);
  double expect = std::numeric_limits<double>::infinity();
  for (const auto& f : log.frames) {
    const Vec3& p = f.pose.position;
    const double sphere = (p - Vec3(2, 2, 0)).norm() - 0.5;
    const Vec3 q = p.cwiseMax(Vec3(-3, -3, 0)).cwiseMin(Vec3(-2, -2, 1));
    expect = std::min({expect, sphere - s.drone_radius, (p - q).norm() - s.drone_radius});
  }
  EXPECT_NEAR(m.min_clearance, expect, 1e-12);
  EXPECT_TRUE(m.success);
  EXPECT_EQ(m.time_to_complete, 4.0);
  log.outcome = Outcome::Collision;
  const Metrics c = compute_metrics(log, s);
  EXPECT_FALSE(c.success);
  EXPECT_EQ(c.collisions, 1);
  EXPECT_FALSE(c.time_to_complete.has_value());
  EXPECT_TRUE(std::isinf(compute_metrics(log, ScenarioSpec{}).min_clearance));
}

TEST(Pgm16, RoundTripIsBigEndianAndExact) {
  const fs::path dir = scratch("pgm");
  fs::create_directories(dir);
  const std::vector<std::uint16_t> px{0, 1, 255, 256, 65535, 1234};
  write_pgm16((dir / "a.pgm").string(), 3, 2, px);
  const std::string raw = slurp(dir / "a.pgm");
  const std::string header = "P5\n3 2\n65535\n";
  ASSERT_EQ(raw.size(), header.size() + 2 * px.size());
  EXPECT_EQ(raw.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(raw[header.size() + 4]), 0x00);  // 255 high byte
  EXPECT_EQ(static_cast<unsigned char>(raw[header.size() + 5]), 0xFF);
  EXPECT_EQ(static_cast<unsigned char>(raw[header.size() + 6]), 0x01);  // 256 high byte
  int w = 0, h = 0;
  EXPECT_EQ(read_pgm16((dir / "a.pgm").string(), w, h), px);
  EXPECT_EQ(w, 3);
  EXPECT_EQ(h, 2);
  EXPECT_THROW(write_pgm16((dir / "b.pgm").string(), 2, 2, px), InvalidInput);
  fs::remove_all(dir);
}

TEST(RecordEpisode, ThirtySecondsGiveThreeHundredOneFrames) {
  ScenarioSpec s = make_scenario(ScenarioKind::SingleSphere, 4);
  HoldPolicy hold;
  ExecutorConfig c;
  c.timeout_s = 30.0;
  const EpisodeLog log = run_episode(s, hold, c);
  const fs::path dir = scratch("record");
  const RecordSummary r = record_episode(log, dir.string());
  EXPECT_EQ(r.depth_frames, 301u);
  const Dataset d = read_dataset(dir.string());
  ASSERT_EQ(d.poses.size(), 301u);
  ASSERT_EQ(d.depth_files.size(), 301u);
  EXPECT_EQ(d.depth_files.front(), "depth/000000.pgm");
  EXPECT_EQ(d.commands.size(), log.commands.size());
  for (std::size_t i = 0; i < d.poses.size(); ++i) {
    const auto& f = log.frames[i];
    EXPECT_EQ(d.poses[i][0], f.time);
    EXPECT_EQ(d.poses[i][1], f.pose.position.x());
    EXPECT_EQ(d.poses[i][4], f.pose.yaw);
    EXPECT_EQ(d.poses[i][7], f.velocity.z());
  }
  for (std::size_t i = 0; i < d.commands.size(); ++i) {
    EXPECT_EQ(d.commands[i][1], log.commands[i].command.position.x());
    EXPECT_EQ(d.commands[i][11], static_cast<double>(log.commands[i].generation));
  }
  int w = 0, h = 0;
  const auto px = read_pgm16((dir / d.depth_files[0]).string(), w, h);
  EXPECT_EQ(w, s.camera.width);
  EXPECT_EQ(px.size(), static_cast<std::size_t>(w) * h);
  fs::remove_all(dir);
}

TEST(RecordEpisode, ManifestIsByteIdenticalAcrossRuns) {
  const ScenarioSpec templ = make_scenario(ScenarioKind::Corridor, 2);
  const auto s = generate_scenarios(templ, 1, 77).front();
  std::string manifests[2];
  for (auto& m : manifests) {
    OraclePolicy oracle(s);
    const fs::path dir = scratch("determinism");
    record_episode(run_episode(s, oracle, ExecutorConfig{}), dir.string());
    m = slurp(dir / "manifest") + slurp(dir / "poses.csv") + slurp(dir / "commands.csv");
    fs::remove_all(dir);
  }
  EXPECT_FALSE(manifests[0].empty());
  EXPECT_EQ(manifests[0], manifests[1]);
}

TEST(ReadDataset, RejectsCorruptTables) {
  const fs::path dir = scratch("corrupt");
  fs::create_directories(dir / "depth");
  std::ofstream(dir / "manifest") << "{}\n";
  std::ofstream(dir / "poses.csv") << "time,x,y,z,yaw,vx,vy,vz\n0,1,2\n";
  std::ofstream(dir / "commands.csv") << "time,x,y,z,vx,vy,vz,ax,ay,az,yaw,generation\n";
  EXPECT_THROW(read_dataset(dir.string()), Error);
  fs::remove_all(dir);
}

TEST(ComputeSpeedup, ArithmeticAndIdentity) {
  ProfileReport before{{{"vit", 2350.0}, {"rest", 1750.0}}, 4100.0};
  ProfileReport after{{{"vit", 120.0}, {"rest", 374.0}}, 494.0};
  const Speedup s = compute_speedup(before, after);
  EXPECT_NEAR(s.factor, 4100.0 / 494.0, 1e-12);
  EXPECT_NEAR(s.percent_reduction, 100.0 * (1.0 - 494.0 / 4100.0), 1e-12);
  EXPECT_NEAR(s.per_stage.at("vit"), 2350.0 / 120.0, 1e-12);
  const Speedup id = compute_speedup(before, before);
  EXPECT_EQ(id.factor, 1.0);
  EXPECT_EQ(id.percent_reduction, 0.0);
  ProfileReport zero = after;
  zero.total_ms = 0.0;
  EXPECT_THROW(compute_speedup(before, zero), InvalidInput);
  ProfileReport other{{{"vit", 1.0}, {"io", 1.0}}, 2.0};
  EXPECT_THROW(compute_speedup(before, other), InvalidInput);
}

TEST(ProfilePipeline, StageSetAndAccounting) {
  const ScenarioSpec s = make_scenario(ScenarioKind::SingleSphere, 1);
  OraclePolicy oracle(s);
  ProfileConfig c;
  c.width = 160;
  c.height = 120;
  c.refine_iterations = 20;
  const ProfileReport one = profile_pipeline(s, oracle, c, 1);
  const ProfileReport many = profile_pipeline(s, oracle, c, 5);
  ASSERT_EQ(one.stages.size(), many.stages.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < many.stages.size(); ++i) {
    EXPECT_EQ(one.stages[i].first, many.stages[i].first);
    EXPECT_GE(many.stages[i].second, 0.0);
    sum += many.stages[i].second;
  }
  EXPECT_LE(sum, many.total_ms * 1.05 + 1e-3);
  c.refine_enabled = false;
  EXPECT_EQ(profile_pipeline(s, oracle, c, 3).stage("refine"), 0.0);
  EXPECT_THROW(profile_pipeline(s, oracle, c, 0), InvalidInput);
  EXPECT_THROW(many.stage("nope"), InvalidInput);
}
