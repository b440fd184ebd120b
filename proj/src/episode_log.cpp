#include "aerialnav/episode_log.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "aerialnav/errors.hpp"

namespace aerialnav {

using nlohmann::json;

namespace {

json vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double num(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  return j.get<double>();
}

Vec3 vec_at(const json& row, std::size_t first, const std::string& field) {
  return Vec3(num(row.at(first), field), num(row.at(first + 1), field), num(row.at(first + 2), field));
}

const json& at(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(key, "missing required field");
  return *it;
}

json decision_json(const NavDecision& d) {
  return {{"seq", d.seq}, {"waypoint", vec(d.waypoint)}, {"yaw", d.yaw}, {"complete", d.complete}, {"replan", d.replan}};
}

NavDecision decision_from(const json& j) {
  NavDecision d;
  d.seq = at(j, "seq").get<std::uint64_t>();
  d.waypoint = vec_at(at(j, "waypoint"), 0, "decision.waypoint");
  d.yaw = num(at(j, "yaw"), "decision.yaw");
  d.complete = at(j, "complete").get<bool>();
  d.replan = at(j, "replan").get<bool>();
  return d;
}

}  // namespace

std::string serialize_episode_log(const EpisodeLog& log, bool include_timings) {
  json j;
  j["format"] = "aerialnav-episode/1";
  j["scenario"] = json::parse(serialize_scenario(log.scenario));
  j["policy"] = log.policy;
  j["rates"] = {{"control", log.control_rate}, {"policy", log.policy_rate}, {"record", log.record_rate}};
  j["policy_latency"] = log.policy_latency;
  j["outcome"] = to_string(log.outcome);
  j["end_time"] = log.end_time;

  // Frames: [t, x, y, z, yaw, vx, vy, vz, command_index | null, depth_index]
  json frames = json::array();
  for (const auto& f : log.frames) {
    json row = {f.time, f.pose.position.x(), f.pose.position.y(), f.pose.position.z(), f.pose.yaw,
                f.velocity.x(), f.velocity.y(), f.velocity.z()};
    row.push_back(f.command_index ? json(*f.command_index) : json(nullptr));
    row.push_back(f.depth_index);
    frames.push_back(std::move(row));
  }
  j["frames"] = std::move(frames);

  // Commands: [t, px, py, pz, vx, vy, vz, ax, ay, az, yaw, generation]
  json commands = json::array();
  for (const auto& c : log.commands) {
    const Command& m = c.command;
    commands.push_back({m.timestamp, m.position.x(), m.position.y(), m.position.z(), m.velocity.x(), m.velocity.y(),
                        m.velocity.z(), m.acceleration.x(), m.acceleration.y(), m.acceleration.z(), m.yaw,
                        c.generation});
  }
  j["commands"] = std::move(commands);

  json events = json::array();
  for (const auto& e : log.events) {
    json ev = {{"time", e.time}, {"kind", e.kind}};
    if (!e.detail.empty()) ev["detail"] = e.detail;
    if (e.from) ev["from"] = to_string(*e.from);
    if (e.to) ev["to"] = to_string(*e.to);
    if (e.event) ev["event"] = to_string(*e.event);
    if (e.decision) ev["decision"] = decision_json(*e.decision);
    events.push_back(std::move(ev));
  }
  j["events"] = std::move(events);

  json trajectories = json::array();
  for (const auto& t : log.trajectories) {
    json points = json::array();
    for (Eigen::Index i = 0; i < t.spline.size(); ++i) points.push_back(vec(t.spline.control_points().col(i)));
    trajectories.push_back({{"generation", t.generation},
                            {"start_time", t.spline.start_time()},
                            {"knot_span", t.spline.knot_span()},
                            {"control_points", std::move(points)}});
  }
  j["trajectories"] = std::move(trajectories);

  if (include_timings) {
    j["timings_ms"] = {{"perception", log.timings.perception_ms},
                       {"refine", log.timings.refine_ms},
                       {"policy", log.timings.policy_ms},
                       {"control", log.timings.control_ms}};
  }
  return j.dump(1) + "\n";
}

EpisodeLog parse_episode_log(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  if (!j.is_object() || j.value("format", "") != "aerialnav-episode/1")
    throw ValidationError("format", "not an episode log");

  EpisodeLog log;
  try {
    log.scenario = load_scenario(at(j, "scenario").dump());
    log.policy = at(j, "policy").get<std::string>();
    const json& rates = at(j, "rates");
    log.control_rate = num(at(rates, "control"), "rates.control");
    log.policy_rate = num(at(rates, "policy"), "rates.policy");
    log.record_rate = num(at(rates, "record"), "rates.record");
    log.policy_latency = num(at(j, "policy_latency"), "policy_latency");
    log.outcome = outcome_from_string(at(j, "outcome").get<std::string>());
    log.end_time = num(at(j, "end_time"), "end_time");

    for (const json& row : at(j, "frames")) {
      if (!row.is_array() || row.size() != 10) throw ValidationError("frames", "expected rows of 10 values");
      FrameRecord f;
      f.time = num(row[0], "frames");
      f.pose.position = vec_at(row, 1, "frames");
      f.pose.yaw = num(row[4], "frames");
      f.velocity = vec_at(row, 5, "frames");
      if (!row[8].is_null()) f.command_index = row[8].get<std::size_t>();
      f.depth_index = row[9].get<std::size_t>();
      log.frames.push_back(f);
    }
    for (const json& row : at(j, "commands")) {
      if (!row.is_array() || row.size() != 12) throw ValidationError("commands", "expected rows of 12 values");
      CommandRecord c;
      c.command.timestamp = num(row[0], "commands");
      c.command.position = vec_at(row, 1, "commands");
      c.command.velocity = vec_at(row, 4, "commands");
      c.command.acceleration = vec_at(row, 7, "commands");
      c.command.yaw = num(row[10], "commands");
      c.generation = row[11].get<std::uint64_t>();
      log.commands.push_back(c);
    }
    for (const json& ev : at(j, "events")) {
      EventRecord e;
      e.time = num(at(ev, "time"), "events.time");
      e.kind = at(ev, "kind").get<std::string>();
      e.detail = ev.value("detail", "");
      if (ev.contains("from")) e.from = exec_state_from_string(ev["from"].get<std::string>());
      if (ev.contains("to")) e.to = exec_state_from_string(ev["to"].get<std::string>());
      if (ev.contains("event")) e.event = exec_event_from_string(ev["event"].get<std::string>());
      if (ev.contains("decision")) e.decision = decision_from(ev["decision"]);
      log.events.push_back(std::move(e));
    }
    for (const json& tj : at(j, "trajectories")) {
      const json& points = at(tj, "control_points");
      if (!points.is_array() || points.size() < static_cast<std::size_t>(BSpline::kMinControlPoints))
        throw ValidationError("trajectories.control_points", "too few control points");
      ControlPoints<double> q(3, static_cast<Eigen::Index>(points.size()));
      for (std::size_t i = 0; i < points.size(); ++i)
        q.col(static_cast<Eigen::Index>(i)) = vec_at(points[i], 0, "trajectories.control_points");
      log.trajectories.push_back({at(tj, "generation").get<std::uint64_t>(),
                                  BSpline(std::move(q), num(at(tj, "knot_span"), "knot_span"),
                                          num(at(tj, "start_time"), "start_time"))});
    }
    if (auto it = j.find("timings_ms"); it != j.end()) {
      log.timings.perception_ms = it->value("perception", 0.0);
      log.timings.refine_ms = it->value("refine", 0.0);
      log.timings.policy_ms = it->value("policy", 0.0);
      log.timings.control_ms = it->value("control", 0.0);
    }
  } catch (const json::exception& e) {
    throw ValidationError("log", e.what());
  } catch (const InvalidInput& e) {
    throw ValidationError("log", e.what());
  }
  return log;
}

void write_episode_log(const EpisodeLog& log, const std::string& path, bool include_timings) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw WriteError(path);
  out << serialize_episode_log(log, include_timings);
  if (!out.flush()) throw WriteError(path);
}

EpisodeLog read_episode_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_episode_log(ss.str());
}

}  // namespace aerialnav
