#include "aerialnav/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "aerialnav/errors.hpp"
#include "aerialnav/wire.hpp"

namespace aerialnav {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t z = master_seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<ScenarioSpec> generate_scenarios(const ScenarioSpec& scenario_template, std::size_t n,
                                             std::uint64_t master_seed, const GenerationOptions& options) {
  if (n < 1) throw InvalidInput("generate_scenarios: n must be at least 1");
  const AxisAlignedBox& b = scenario_template.bounds;
  if (!(b.min.array() <= b.max.array()).all()) throw InvalidInput("generate_scenarios: invalid bounds");
  if (scenario_template.goals.empty()) throw InvalidInput("generate_scenarios: template has no goals");

  const double clearance = scenario_template.drone_radius + options.s_clear;
  std::vector<ScenarioSpec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t seed = derive_seed(master_seed, i);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(b.min.x(), b.max.x());
    std::uniform_real_distribution<double> uy(b.min.y(), b.max.y());
    std::uniform_real_distribution<double> uz(b.min.z(), b.max.z());

    int attempts = 0;
    auto sample = [&](const Vec3* previous) {
      while (attempts < options.max_attempts) {
        ++attempts;
        const Vec3 p(ux(rng), uy(rng), uz(rng));
        if (signed_distance(scenario_template.world, p) < clearance) continue;
        if (previous != nullptr && (p - *previous).norm() < options.min_separation) continue;
        return p;
      }
      throw GenerationInfeasible(i);
    };

    ScenarioSpec s = scenario_template;
    s.name = scenario_template.name + "_" + std::to_string(i);
    s.seed = seed;
    s.start.position = sample(nullptr);
    const Vec3* previous = &s.start.position;
    for (auto& goal : s.goals) {
      goal.position = sample(previous);
      previous = &goal.position;
    }
    const Vec3 heading = s.goals.front().position - s.start.position;
    s.start.yaw = heading.head<2>().norm() > 1e-9 ? wrap_yaw(std::atan2(heading.y(), heading.x())) : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

Metrics compute_metrics(const EpisodeLog& log, const ScenarioSpec& scenario) {
  Metrics m;
  m.success = log.outcome == Outcome::Success;
  m.collisions = log.outcome == Outcome::Collision ? 1 : 0;
  m.min_clearance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < log.frames.size(); ++i) {
    const Vec3& p = log.frames[i].pose.position;
    if (i > 0) m.path_length += (p - log.frames[i - 1].pose.position).norm();
    m.min_clearance = std::min(m.min_clearance, signed_distance(scenario.world, p) - scenario.drone_radius);
  }
  if (m.success) m.time_to_complete = log.end_time;
  for (const auto& e : log.events)
    if (e.kind == "transition" && e.to == ExecState::Replanning) ++m.replan_count;
  return m;
}

// ---------------------------------------------------------------------------
// Recording

namespace {

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_number(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ParseError(0, where + ": bad number '" + std::string(s) + "'");
  return v;
}

template <std::size_t N>
std::vector<std::array<double, N>> read_table(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != header) throw ValidationError(path.string(), "unexpected header");
  std::vector<std::array<double, N>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<double, N> row{};
    std::size_t start = 0;
    for (std::size_t k = 0; k < N; ++k) {
      const std::size_t comma = line.find(',', start);
      const bool last = k + 1 == N;
      if (last != (comma == std::string::npos)) throw ValidationError(path.string(), "wrong column count");
      row[k] = parse_number(std::string_view(line).substr(start, last ? std::string::npos : comma - start),
                            path.string());
      start = comma + 1;
    }
    rows.push_back(row);
  }
  return rows;
}

json metrics_json(const Metrics& m) {
  return {{"success", m.success},
          {"collisions", m.collisions},
          {"path_length_m", m.path_length},
          {"min_clearance_m", std::isfinite(m.min_clearance) ? json(m.min_clearance) : json(nullptr)},
          {"time_to_complete_s", m.time_to_complete ? json(*m.time_to_complete) : json(nullptr)},
          {"replan_count", m.replan_count}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WriteError(path.string());
  out << text;
  if (!out.flush()) throw WriteError(path.string());
}

}  // namespace

void write_pgm16(const std::string& path, int width, int height, const std::vector<std::uint16_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw InvalidInput("write_pgm16: size mismatch");
  std::string data = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
  const std::size_t header = data.size();
  data.resize(header + 2 * pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    data[header + 2 * i] = static_cast<char>(pixels[i] >> 8);
    data[header + 2 * i + 1] = static_cast<char>(pixels[i] & 0xFF);
  }
  write_text(path, data);
}

std::vector<std::uint16_t> read_pgm16(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  std::string magic;
  int maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P5" || width < 0 || height < 0 || maxval != 65535) throw ValidationError(path, "not a 16-bit PGM");
  in.get();
  std::vector<std::uint16_t> pixels(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  std::vector<unsigned char> raw(pixels.size() * 2);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw ValidationError(path, "truncated PGM");
  for (std::size_t i = 0; i < pixels.size(); ++i)
    pixels[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
  return pixels;
}

RecordSummary record_episode(const EpisodeLog& log, const std::string& output_dir) {
  const fs::path dir(output_dir);
  std::error_code ec;
  fs::create_directories(dir / "depth", ec);
  if (ec) throw WriteError((dir / "depth").string());

  RecordSummary summary;
  summary.directory = dir.string();
  const ScenarioSpec& scenario = log.scenario;

  std::string poses = "time,x,y,z,yaw,vx,vy,vz\n";
  for (const auto& f : log.frames) {
    const double row[] = {f.time, f.pose.position.x(), f.pose.position.y(), f.pose.position.z(), f.pose.yaw,
                          f.velocity.x(), f.velocity.y(), f.velocity.z()};
    for (std::size_t k = 0; k < std::size(row); ++k) poses += (k ? "," : "") + format_number(row[k]);
    poses += "\n";

    const Rigid3 view = camera_pose(f.pose, scenario.camera);
    const DepthImage depth = render_depth(scenario.world, scenario.camera, view, f.time);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.pgm", f.depth_index);
    write_pgm16((dir / "depth" / name).string(), depth.width, depth.height, depth_to_millimeters(depth));
    ++summary.depth_frames;
  }
  summary.pose_rows = log.frames.size();
  write_text(dir / "poses.csv", poses);

  std::string commands = "time,x,y,z,vx,vy,vz,ax,ay,az,yaw,generation\n";
  for (const auto& c : log.commands) {
    const Command& m = c.command;
    const double row[] = {m.timestamp, m.position.x(), m.position.y(), m.position.z(), m.velocity.x(),
                          m.velocity.y(), m.velocity.z(), m.acceleration.x(), m.acceleration.y(),
                          m.acceleration.z(), m.yaw};
    for (std::size_t k = 0; k < std::size(row); ++k) commands += (k ? "," : "") + format_number(row[k]);
    commands += "," + std::to_string(c.generation) + "\n";
  }
  summary.command_rows = log.commands.size();
  write_text(dir / "commands.csv", commands);

  const Metrics metrics = compute_metrics(log, scenario);
  const json manifest = {
      {"format", "aerialnav-dataset/1"},
      {"scenario", scenario.name},
      {"seed", scenario.seed},
      {"policy", log.policy},
      {"rates_hz", {{"control", log.control_rate}, {"policy", log.policy_rate}, {"record", log.record_rate}}},
      {"policy_latency_s", log.policy_latency},
      {"outcome", to_string(log.outcome)},
      {"duration_s", log.end_time},
      {"metrics", metrics_json(metrics)},
      {"files",
       {{"poses", "poses.csv"}, {"commands", "commands.csv"}, {"depth", "depth/NNNNNN.pgm"},
        {"depth_frames", summary.depth_frames}}},
      {"depth_format", "P5 16-bit millimetres"},
      {"scenario_spec", json::parse(serialize_scenario(scenario))}};
  write_text(dir / "manifest", manifest.dump(2) + "\n");
  return summary;
}

Dataset read_dataset(const std::string& directory) {
  const fs::path dir(directory);
  Dataset d;
  {
    std::ifstream in(dir / "manifest", std::ios::binary);
    if (!in) throw InvalidInput("cannot read '" + (dir / "manifest").string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    d.manifest = ss.str();
  }
  d.poses = read_table<8>(dir / "poses.csv", "time,x,y,z,yaw,vx,vy,vz");
  d.commands = read_table<12>(dir / "commands.csv", "time,x,y,z,vx,vy,vz,ax,ay,az,yaw,generation");
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir / "depth", ec))
    if (entry.path().extension() == ".pgm") d.depth_files.push_back("depth/" + entry.path().filename().string());
  std::sort(d.depth_files.begin(), d.depth_files.end());
  return d;
}

// ---------------------------------------------------------------------------
// Profiling

double ProfileReport::stage(const std::string& name) const {
  for (const auto& [n, ms] : stages)
    if (n == name) return ms;
  throw InvalidInput("ProfileReport: no stage named '" + name + "'");
}

Speedup compute_speedup(const ProfileReport& before, const ProfileReport& after) {
  if (before.stages.size() != after.stages.size()) throw InvalidInput("compute_speedup: stage sets differ");
  const auto ratio = [](double b, double a, const std::string& what) {
    if (!(a > 0.0)) throw InvalidInput("compute_speedup: zero duration after optimisation in " + what);
    return b / a;
  };
  Speedup s;
  s.factor = ratio(before.total_ms, after.total_ms, "total");
  s.percent_reduction = 100.0 * (1.0 - after.total_ms / before.total_ms);
  for (const auto& [name, ms] : before.stages) {
    const double a = after.stage(name);
    s.per_stage[name] = ratio(ms, a, name);
    s.per_stage_reduction[name] = 100.0 * (1.0 - a / ms);
  }
  return s;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ProfileReport profile_pipeline(const ScenarioSpec& scenario, Policy& policy, const ProfileConfig& config,
                               int repetitions) {
  if (repetitions < 1) throw InvalidInput("profile_pipeline: repetitions must be at least 1");
  if (scenario.goals.empty()) throw InvalidInput("profile_pipeline: scenario has no goals");
  using Clock = std::chrono::steady_clock;
  const auto elapsed = [](Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
  };

  CameraModel camera = scenario.camera;
  const double scale = static_cast<double>(config.width) / camera.width;
  camera.fx *= scale;
  camera.fy *= static_cast<double>(config.height) / camera.height;
  camera.cx = (config.width - 1) / 2.0;
  camera.cy = (config.height - 1) / 2.0;
  camera.width = config.width;
  camera.height = config.height;
  validate(camera);

  // Straight reference with exactly config.control_points control points.
  const SimState start{scenario.start, Vec3::Zero(), 0.0};
  const double dt = config.executor.knot_span;
  const double spacing = 0.6 * scenario.limits.v_max * dt;
  Vec3 heading = scenario.goals.front().position - scenario.start.position;
  heading = heading.norm() > 1e-9 ? Vec3(heading.normalized()) : Vec3::UnitX();
  const double length = (static_cast<double>(config.control_points - 6) + 0.5) * spacing;
  const Vec3 target = scenario.start.position + heading * length;
  const BSpline reference = init_straight(start, Vec3::Zero(), target, scenario.limits, dt);

  const Rigid3 view = camera_pose(scenario.start, camera);
  const DepthImage depth = render_depth(scenario.world, camera, view, 0.0);
  PerceptionConfig perception = config.executor.perception;
  perception.stride = config.stride;

  RefineConfig refine_config = config.executor.margins_for(scenario.drone_radius);
  refine_config.max_iters = config.refine_iterations;
  refine_config.max_outer_rounds = 1;
  refine_config.grad_tol = 0.0;
  refine_config.rel_cost_tol = 0.0;

  const char* names[] = {"perception", "conflict", "refine", "reallocate", "policy", "control"};
  std::vector<std::vector<double>> samples(std::size(names));
  std::vector<double> totals;
  const int period = static_cast<int>(std::lround(config.executor.control_rate / config.executor.policy_rate));
  for (int rep = 0; rep < repetitions; ++rep) {
    double times[std::size(names)] = {};
    auto t0 = Clock::now();
    const LocalObstacleCloud cloud = backproject(depth, camera, view, perception);
    times[0] = elapsed(t0);

    t0 = Clock::now();
    const auto conflicts = detect_conflicts(reference, cloud, refine_config.s_clear);
    times[1] = elapsed(t0);

    BSpline refined = reference;
    if (config.refine_enabled) {
      t0 = Clock::now();
      auto r = refine(reference, cloud, refine_config, scenario.limits);
      times[2] = elapsed(t0);
      if (r.trajectory) refined = *r.trajectory;
    }

    t0 = Clock::now();
    refined = reallocate_time(refined, scenario.limits.v_max, scenario.limits.a_max);
    times[3] = elapsed(t0);

    Observation obs;
    obs.pose = scenario.start;
    obs.instruction = scenario.instruction;
    obs.seq = static_cast<std::uint64_t>(rep);
    t0 = Clock::now();
    (void)policy.decide(obs);
    times[4] = elapsed(t0);

    t0 = Clock::now();
    double yaw = scenario.start.yaw;
    for (int k = 0; k < period; ++k)
      yaw = sample_command(refined, k / config.executor.control_rate, scenario.start.yaw, yaw,
                           scenario.limits.yaw_rate_max, 1.0 / config.executor.control_rate)
                .yaw;
    times[5] = elapsed(t0);

    double total = 0.0;
    for (std::size_t s = 0; s < std::size(names); ++s) {
      samples[s].push_back(times[s]);
      total += times[s];
    }
    totals.push_back(total);
    (void)conflicts;
  }

  ProfileReport report;
  for (std::size_t s = 0; s < std::size(names); ++s) report.stages.emplace_back(names[s], median(samples[s]));
  report.total_ms = median(totals);
  return report;
}

}  // namespace aerialnav
