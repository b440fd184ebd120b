#include "aerialnav/cli.hpp"

#include <atomic>
#include <charconv>
#include <csignal>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "aerialnav/episode_log.hpp"
#include "aerialnav/errors.hpp"
#include "aerialnav/plot.hpp"
#include "aerialnav/scenario_library.hpp"
#include "aerialnav/wire.hpp"

namespace aerialnav {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (policy != "oracle" && policy != "scripted" && policy.rfind("remote:", 0) != 0)
    throw InvalidInput("policy must be oracle, scripted or remote:<host>:<port>");
  if (!(remote_timeout_s > 0.0)) throw InvalidInput("remote timeout must be positive");
  executor.validate();
}

std::unique_ptr<Policy> make_policy(const RunConfig& config, const ScenarioSpec& scenario) {
  if (config.policy == "oracle") return std::make_unique<OraclePolicy>(scenario);
  if (config.policy == "scripted") return std::make_unique<ScriptedPolicy>(scenario.goals, scenario.world);
  if (config.policy.rfind("remote:", 0) == 0) {
    const std::string address = config.policy.substr(7);
    const auto colon = address.rfind(':');
    int port = 0;
    if (colon == std::string::npos ||
        std::from_chars(address.data() + colon + 1, address.data() + address.size(), port).ec != std::errc() ||
        port <= 0 || port > 65535)
      throw InvalidInput("remote policy needs remote:<host>:<port>");
    return std::make_unique<RemotePolicy>(address.substr(0, colon), port, config.remote_timeout_s, config.send_depth);
  }
  throw InvalidInput("unknown policy '" + config.policy + "'");
}

std::vector<SuiteEntry> load_suite_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read suite manifest '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  if (!j.is_object() || !j.contains("episodes") || !j["episodes"].is_array())
    throw ValidationError("episodes", "suite manifest needs an 'episodes' array");
  const fs::path base = fs::path(path).parent_path();
  std::vector<SuiteEntry> out;
  for (const auto& e : j["episodes"]) {
    if (!e.is_object() || !e.contains("category") || !e.contains("scenario") || !e["category"].is_string() ||
        !e["scenario"].is_string())
      throw ValidationError("episodes", "each entry needs string 'category' and 'scenario'");
    const fs::path scenario = e["scenario"].get<std::string>();
    out.push_back({e["category"].get<std::string>(), (scenario.is_absolute() ? scenario : base / scenario).string()});
  }
  return out;
}

namespace {

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : "nan";
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WriteError(path.string());
  out << text;
  if (!out.flush()) throw WriteError(path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw WriteError(dir.string());
}

std::string metrics_csv(const std::string& scenario, const std::string& outcome, const Metrics& m) {
  std::string s = "scenario,outcome,success,collisions,path_length_m,min_clearance_m,time_to_complete_s,replan_count\n";
  s += scenario + "," + outcome + "," + (m.success ? "1" : "0") + "," + std::to_string(m.collisions) + "," +
       fixed(m.path_length, 4) + "," + fixed(m.min_clearance, 4) + "," +
       (m.time_to_complete ? fixed(*m.time_to_complete, 4) : std::string()) + "," + std::to_string(m.replan_count) +
       "\n";
  return s;
}

int exit_code_for(Outcome outcome) { return outcome == Outcome::Success ? kExitSuccess : kExitFailure; }

void add_common_options(CLI::App& cmd, RunConfig& config) {
  cmd.add_option("--policy", config.policy, "oracle | scripted | remote:<host>:<port>")
      ->envname("AERIALNAV_POLICY")
      ->capture_default_str();
  cmd.add_option("--control-rate", config.executor.control_rate, "Command rate in Hz")
      ->envname("AERIALNAV_CONTROL_RATE")
      ->capture_default_str();
  cmd.add_option("--policy-rate", config.executor.policy_rate, "Policy query rate in Hz")
      ->envname("AERIALNAV_POLICY_RATE")
      ->capture_default_str();
  cmd.add_option("--seconds-per-token", config.executor.latency.seconds_per_token, "Modeled decode time per token")
      ->envname("AERIALNAV_SECONDS_PER_TOKEN")
      ->capture_default_str();
  cmd.add_option("--output-tokens", config.executor.latency.output_tokens, "Modeled tokens per decision")
      ->envname("AERIALNAV_OUTPUT_TOKENS")
      ->capture_default_str();
  cmd.add_option("--prefill", config.executor.latency.prefill_seconds, "Fixed latency added to every decision")
      ->envname("AERIALNAV_PREFILL")
      ->capture_default_str();
  cmd.add_option("--timeout", config.executor.timeout_s, "Episode time limit in seconds")
      ->envname("AERIALNAV_TIMEOUT")
      ->capture_default_str();
  cmd.add_option("--knot-span", config.executor.knot_span, "Initial B-spline knot span in seconds")
      ->envname("AERIALNAV_KNOT_SPAN")
      ->capture_default_str();
  cmd.add_option("--remote-timeout", config.remote_timeout_s, "Remote policy reply timeout in seconds")
      ->envname("AERIALNAV_REMOTE_TIMEOUT")
      ->capture_default_str();
  cmd.add_flag("--send-depth", config.send_depth, "Include the depth image in remote requests");
  cmd.add_flag("--wall-clock", config.executor.wall_clock, "Run against the wall clock instead of simulated time");
  cmd.add_flag("!--no-refine", config.executor.refine_enabled, "Fly the straight reference without refinement");
  cmd.add_option("--out", config.output_dir, "Output directory")->envname("AERIALNAV_OUT")->capture_default_str();
}

struct EpisodeResult {
  ScenarioSpec scenario;
  EpisodeLog log;
  Metrics metrics;
};

EpisodeResult run_one(const std::string& path, const RunConfig& config) {
  EpisodeResult r;
  r.scenario = load_scenario_file(path);
  if (config.seed) r.scenario.seed = *config.seed;
  auto policy = make_policy(config, r.scenario);
  r.log = run_episode(r.scenario, *policy, config.executor);
  r.metrics = compute_metrics(r.log, r.scenario);
  return r;
}

void print_metrics(std::ostream& out, const ScenarioSpec& scenario, const EpisodeLog& log, const Metrics& m) {
  out << "scenario          " << scenario.name << "\n"
      << "outcome           " << to_string(log.outcome) << "\n"
      << "duration_s        " << fixed(log.end_time, 3) << "\n"
      << "success           " << (m.success ? "yes" : "no") << "\n"
      << "collisions        " << m.collisions << "\n"
      << "path_length_m     " << fixed(m.path_length, 3) << "\n"
      << "min_clearance_m   " << fixed(m.min_clearance, 3) << "\n"
      << "time_to_complete  " << (m.time_to_complete ? fixed(*m.time_to_complete, 3) : std::string("-")) << "\n"
      << "replans           " << m.replan_count << "\n"
      << "commands          " << log.commands.size() << "\n"
      << "frames            " << log.frames.size() << "\n";
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_run(const RunConfig& config, bool record, bool timings, std::ostream& out) {
  const auto& path = config.scenario_paths.front();
  if (!fs::exists(path)) throw InvalidInput("scenario file '" + path + "' does not exist");
  EpisodeResult r = run_one(path, config);
  print_metrics(out, r.scenario, r.log, r.metrics);
  const fs::path dir(config.output_dir);
  ensure_dir(dir);
  write_episode_log(r.log, (dir / "episode.json").string(), timings);
  write_file(dir / "metrics.csv", metrics_csv(r.scenario.name, to_string(r.log.outcome), r.metrics));
  out << "log               " << (dir / "episode.json").string() << "\n";
  if (record) {
    const auto summary = record_episode(r.log, (dir / "dataset").string());
    out << "dataset           " << summary.directory << " (" << summary.depth_frames << " frames)\n";
  }
  return exit_code_for(r.log.outcome);
}

int cmd_suite(const std::string& manifest, const RunConfig& config, int jobs, std::ostream& out) {
  const auto entries = load_suite_manifest(manifest);
  struct Slot {
    std::string category;
    bool error = false;
    std::string message;
    Metrics metrics;
  };
  std::vector<Slot> slots(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      slots[i].category = entries[i].category;
      try {
        slots[i].metrics = run_one(entries[i].scenario_path, config).metrics;
      } catch (const std::exception& e) {
        slots[i].error = true;
        slots[i].message = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(jobs, 1); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<std::string> order;
  std::map<std::string, std::vector<const Slot*>> groups;
  for (const auto& s : slots) {
    const std::string key = s.error ? "Error" : s.category;
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&s);
  }
  std::vector<SuiteRow> rows;
  for (const auto& key : order) {
    SuiteRow row;
    row.category = key;
    int finite = 0;
    for (const Slot* s : groups[key]) {
      ++row.episodes;
      if (s->error) continue;
      row.success_rate += s->metrics.success ? 1.0 : 0.0;
      row.mean_path_m += s->metrics.path_length;
      if (std::isfinite(s->metrics.min_clearance)) {
        row.mean_clearance_m += s->metrics.min_clearance;
        ++finite;
      }
    }
    row.success_rate = 100.0 * row.success_rate / row.episodes;
    row.mean_path_m /= row.episodes;
    row.mean_clearance_m = finite > 0 ? row.mean_clearance_m / finite : std::numeric_limits<double>::infinity();
    rows.push_back(row);
  }

  out << std::left << std::setw(20) << "category" << std::right << std::setw(10) << "episodes" << std::setw(10)
      << "SR%" << std::setw(14) << "mean_path_m" << std::setw(18) << "mean_clearance_m" << "\n";
  for (const auto& r : rows)
    out << std::left << std::setw(20) << r.category << std::right << std::setw(10) << r.episodes << std::setw(10)
        << fixed(r.success_rate, 1) << std::setw(14) << fixed(r.mean_path_m, 3) << std::setw(18)
        << fixed(r.mean_clearance_m, 3) << "\n";
  for (const auto& s : slots)
    if (s.error) out << "error: " << s.message << "\n";

  const fs::path dir(config.output_dir);
  ensure_dir(dir);
  write_file(dir / "suite.csv", suite_csv(rows));
  out << "csv: " << (dir / "suite.csv").string() << "\n";
  return kExitSuccess;
}

int cmd_gen_data(const std::string& template_path, const std::string& kind, std::size_t count, std::uint64_t seed,
                 const RunConfig& config, std::ostream& out) {
  ScenarioSpec templ = template_path.empty() ? make_scenario(scenario_kind_from_string(kind), seed)
                                             : load_scenario_file(template_path);
  if (template_path.empty()) templ.name = kind;
  const auto scenarios = generate_scenarios(templ, count, seed);
  const fs::path dir(config.output_dir);
  ensure_dir(dir);
  std::string index = "episode,scenario,seed,outcome,frames\n";
  int failures = 0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const ScenarioSpec& s = scenarios[i];
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%04zu", i);
    auto policy = make_policy(config, s);
    const EpisodeLog log = run_episode(s, *policy, config.executor);
    const auto summary = record_episode(log, (dir / name).string());
    write_file(dir / name / "scenario.json", serialize_scenario(s));
    index += std::string(name) + "," + s.name + "," + std::to_string(s.seed) + "," + to_string(log.outcome) + "," +
             std::to_string(summary.depth_frames) + "\n";
    if (log.outcome != Outcome::Success) ++failures;
    out << name << "  " << s.name << "  " << to_string(log.outcome) << "  frames=" << summary.depth_frames << "\n";
  }
  write_file(dir / "index.csv", index);
  out << "episodes: " << scenarios.size() << "  failures: " << failures << "\n";
  return kExitSuccess;
}

ProfileReport report_from_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read profile '" + path + "'");
  const json j = json::parse(in);
  ProfileReport r;
  for (const auto& s : j.at("stages")) r.stages.emplace_back(s.at("name").get<std::string>(), s.at("ms").get<double>());
  r.total_ms = j.at("total_ms").get<double>();
  return r;
}

std::string report_json(const ProfileReport& r) {
  json stages = json::array();
  for (const auto& [name, ms] : r.stages) stages.push_back({{"name", name}, {"ms", ms}});
  return json{{"stages", stages}, {"total_ms", r.total_ms}}.dump(2) + "\n";
}

int cmd_profile(const std::string& scenario_path, const std::string& kind, ProfileConfig profile, int repetitions,
                const std::string& baseline, const RunConfig& config, std::ostream& out) {
  const ScenarioSpec scenario =
      scenario_path.empty() ? make_scenario(scenario_kind_from_string(kind), 1) : load_scenario_file(scenario_path);
  auto policy = make_policy(config, scenario);
  profile.executor = config.executor;
  profile.refine_enabled = config.executor.refine_enabled;
  const ProfileReport report = profile_pipeline(scenario, *policy, profile, repetitions);

  std::string csv = "stage,median_ms\n";
  out << std::left << std::setw(14) << "stage" << std::right << std::setw(12) << "median_ms" << "\n";
  for (const auto& [name, ms] : report.stages) {
    out << std::left << std::setw(14) << name << std::right << std::setw(12) << fixed(ms, 3) << "\n";
    csv += name + "," + fixed(ms, 6) + "\n";
  }
  out << std::left << std::setw(14) << "total" << std::right << std::setw(12) << fixed(report.total_ms, 3) << "\n";
  csv += "total," + fixed(report.total_ms, 6) + "\n";

  const fs::path dir(config.output_dir);
  ensure_dir(dir);
  write_file(dir / "profile.csv", csv);
  write_file(dir / "profile.json", report_json(report));

  if (!baseline.empty()) {
    const Speedup s = compute_speedup(report_from_json(baseline), report);
    std::string scsv = "stage,factor,percent_reduction\n";
    out << "speedup vs baseline: " << fixed(s.factor, 2) << "x, " << fixed(s.percent_reduction, 1) << "% reduction\n";
    for (const auto& [name, f] : s.per_stage) {
      out << "  " << std::left << std::setw(12) << name << std::right << std::setw(10) << fixed(f, 2) << "x\n";
      scsv += name + "," + fixed(f, 4) + "," + fixed(s.per_stage_reduction.at(name), 3) + "\n";
    }
    scsv += "total," + fixed(s.factor, 4) + "," + fixed(s.percent_reduction, 3) + "\n";
    write_file(dir / "speedup.csv", scsv);
  }
  return kExitSuccess;
}

std::atomic<bool> g_interrupted{false};

extern "C" void on_interrupt(int) { g_interrupted = true; }

int cmd_serve(const std::string& host, int port, const std::string& scenario_path, double delay, double duration,
              std::ostream& out) {
  std::optional<ScenarioSpec> scenario;
  if (!scenario_path.empty()) scenario = load_scenario_file(scenario_path);
  std::unique_ptr<OraclePolicy> oracle = scenario ? std::make_unique<OraclePolicy>(*scenario) : nullptr;
  PolicyServer::Handler handler = [&](const Observation& obs) {
    if (oracle) return *oracle->decide(obs);
    NavDecision hold;
    hold.waypoint = obs.pose.position;
    hold.yaw = wrap_yaw(obs.pose.yaw);
    return hold;
  };
  PolicyServer server(handler, {host, port, delay});
  server.start();
  out << "listening on " << host << ":" << server.port() << std::endl;
  std::signal(SIGINT, on_interrupt);
  std::signal(SIGTERM, on_interrupt);
  const auto started = std::chrono::steady_clock::now();
  while (!g_interrupted) {
    if (duration > 0.0 && std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >= duration)
      break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  return kExitSuccess;
}

}  // namespace

std::string suite_csv(const std::vector<SuiteRow>& rows) {
  std::string s = "category,episodes,success_rate,mean_path_m,mean_clearance_m\n";
  for (const auto& r : rows)
    s += r.category + "," + std::to_string(r.episodes) + "," + fixed(r.success_rate, 2) + "," + fixed(r.mean_path_m, 4) +
         "," + fixed(r.mean_clearance_m, 4) + "\n";
  return s;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-loop aerial navigation simulator with a depth-based safety layer"};
  app.require_subcommand(1);

  RunConfig config;
  std::string scenario_path;
  std::uint64_t seed = 0;
  bool record = false;
  bool timings = false;
  auto* run = app.add_subcommand("run", "Run one episode");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->envname("AERIALNAV_SCENARIO");
  auto* seed_opt = run->add_option("--seed", seed, "Seed recorded with the episode")->envname("AERIALNAV_SEED");
  run->add_flag("--record", record, "Also write the 10 Hz dataset under <out>/dataset");
  run->add_flag("--timings", timings, "Include wall-clock stage timings in the log");
  add_common_options(*run, config);

  std::string manifest;
  int jobs = 1;
  auto* suite = app.add_subcommand("suite", "Run every scenario of a suite manifest");
  suite->add_option("--manifest", manifest, "Suite manifest JSON")->required();
  suite->add_option("--jobs", jobs, "Episodes run in parallel")->envname("AERIALNAV_JOBS")->capture_default_str();
  add_common_options(*suite, config);

  std::string template_path;
  std::string kind = "sphere_field";
  std::size_t count = 10;
  std::uint64_t master_seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate randomized scenarios and record oracle episodes");
  gen->add_option("--template", template_path, "Template scenario JSON (overrides --kind)");
  gen->add_option("--kind", kind, "Procedural template kind")->capture_default_str();
  gen->add_option("--count", count, "Number of episodes")->capture_default_str();
  gen->add_option("--seed", master_seed, "Master seed")->envname("AERIALNAV_SEED")->capture_default_str();
  add_common_options(*gen, config);

  ProfileConfig profile;
  int repetitions = 21;
  std::string baseline;
  std::string profile_kind = "single_sphere";
  auto* prof = app.add_subcommand("profile", "Median stage latency of one replan cycle");
  prof->add_option("--scenario", scenario_path, "Scenario JSON file (default: a procedural single-sphere scene)");
  prof->add_option("--kind", profile_kind, "Procedural scene kind when no file is given")->capture_default_str();
  prof->add_option("--repetitions", repetitions, "Repetitions")->capture_default_str();
  prof->add_option("--width", profile.width, "Depth image width")->capture_default_str();
  prof->add_option("--height", profile.height, "Depth image height")->capture_default_str();
  prof->add_option("--stride", profile.stride, "Backprojection pixel stride")->capture_default_str();
  prof->add_option("--control-points", profile.control_points, "Control points of the reference")->capture_default_str();
  prof->add_option("--iterations", profile.refine_iterations, "Refinement iterations")->capture_default_str();
  prof->add_option("--baseline", baseline, "Earlier profile.json to compare against");
  add_common_options(*prof, config);

  std::string log_path;
  std::string svg_path = "episode.svg";
  auto* plot = app.add_subcommand("plot", "Top-down SVG of an episode log");
  plot->add_option("--log", log_path, "Episode log JSON")->required();
  plot->add_option("--out", svg_path, "Output SVG path")->capture_default_str();

  std::string host = "127.0.0.1";
  int port = 5555;
  double delay = 0.0;
  double duration = 0.0;
  std::string serve_scenario;
  auto* serve = app.add_subcommand("serve-dummy-policy", "Loopback policy server speaking the wire protocol");
  serve->add_option("--host", host, "IPv4 address to bind")->envname("AERIALNAV_HOST")->capture_default_str();
  serve->add_option("--port", port, "Port (0 picks a free one)")->envname("AERIALNAV_PORT")->capture_default_str();
  serve->add_option("--scenario", serve_scenario, "Answer with the oracle for this scenario (default: hold position)");
  serve->add_option("--delay", delay, "Seconds to wait before each reply")->capture_default_str();
  serve->add_option("--duration", duration, "Stop after this many seconds (0: until interrupted)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitSuccess;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (*run) {
      config.scenario_paths = {scenario_path};
      if (*seed_opt) config.seed = seed;
      config.validate();
      return cmd_run(config, record, timings, out);
    }
    if (*suite) {
      config.validate();
      return cmd_suite(manifest, config, jobs, out);
    }
    if (*gen) {
      config.validate();
      return cmd_gen_data(template_path, kind, count, master_seed, config, out);
    }
    if (*prof) {
      config.validate();
      return cmd_profile(scenario_path, profile_kind, profile, repetitions, baseline, config, out);
    }
    if (*plot) {
      write_plot_svg(read_episode_log(log_path), svg_path);
      out << "wrote " << svg_path << "\n";
      return kExitSuccess;
    }
    if (*serve) return cmd_serve(host, port, serve_scenario, delay, duration, out);
  } catch (const ConnectionLost& e) {
    err << "error: policy connection: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}

}  // namespace aerialnav
