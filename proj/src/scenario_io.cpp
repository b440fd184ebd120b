#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aerialnav/errors.hpp"
#include "aerialnav/world.hpp"

namespace aerialnav {

using nlohmann::json;

namespace {

void check_keys(const json& object, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!object.is_object()) throw ValidationError(where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : object.items()) {
    if (!ok.count(key)) throw ValidationError(where.empty() ? key : where + "." + key, "unknown key");
  }
}

const json& require(const json& object, const char* key, const std::string& field) {
  auto it = object.find(key);
  if (it == object.end()) throw ValidationError(field, "missing required field");
  return *it;
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ValidationError(field, "must be finite");
  return v;
}

template <int N>
Eigen::Matrix<double, N, 1> vector_n(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != N) throw ValidationError(field, "expected an array of " + std::to_string(N));
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = number(j[i], field);
  return out;
}

double optional_number(const json& object, const char* key, double fallback, const std::string& field) {
  auto it = object.find(key);
  return it == object.end() ? fallback : number(*it, field);
}

Primitive parse_primitive(const json& j, const std::string& field) {
  if (!j.is_object()) throw ValidationError(field, "expected an object");
  const auto& type = require(j, "type", field + ".type");
  if (!type.is_string()) throw ValidationError(field + ".type", "expected a string");
  const std::string kind = type.get<std::string>();
  Primitive out;
  if (kind == "sphere") {
    check_keys(j, field, {"type", "center", "radius"});
    out = Sphere{vector_n<3>(require(j, "center", field + ".center"), field + ".center"),
                 number(require(j, "radius", field + ".radius"), field + ".radius")};
  } else if (kind == "box") {
    check_keys(j, field, {"type", "min", "max"});
    out = AxisAlignedBox{vector_n<3>(require(j, "min", field + ".min"), field + ".min"),
                         vector_n<3>(require(j, "max", field + ".max"), field + ".max")};
  } else if (kind == "cylinder") {
    check_keys(j, field, {"type", "center_xy", "radius", "z_min", "z_max"});
    out = VerticalCylinder{vector_n<2>(require(j, "center_xy", field + ".center_xy"), field + ".center_xy"),
                           number(require(j, "radius", field + ".radius"), field + ".radius"),
                           number(require(j, "z_min", field + ".z_min"), field + ".z_min"),
                           number(require(j, "z_max", field + ".z_max"), field + ".z_max")};
  } else {
    throw ValidationError(field + ".type", "unknown primitive type '" + kind + "'");
  }
  try {
    validate(out);
  } catch (const InvalidInput& e) {
    throw ValidationError(field, e.what());
  }
  return out;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const Primitive& p) {
  return std::visit(
      [](const auto& prim) -> json {
        using T = std::decay_t<decltype(prim)>;
        if constexpr (std::is_same_v<T, Sphere>) {
          return {{"type", "sphere"}, {"center", to_json(prim.center)}, {"radius", prim.radius}};
        } else if constexpr (std::is_same_v<T, AxisAlignedBox>) {
          return {{"type", "box"}, {"min", to_json(prim.min)}, {"max", to_json(prim.max)}};
        } else {
          return {{"type", "cylinder"},
                  {"center_xy", json::array({prim.center_xy.x(), prim.center_xy.y()})},
                  {"radius", prim.radius},
                  {"z_min", prim.z_min},
                  {"z_max", prim.z_max}};
        }
      },
      p);
}

bool inside(const AxisAlignedBox& box, const Vec3& p) {
  return (p.array() >= box.min.array()).all() && (p.array() <= box.max.array()).all();
}

}  // namespace

void validate(const ScenarioSpec& spec) {
  for (std::size_t i = 0; i < spec.world.size(); ++i) {
    try {
      validate(spec.world[i]);
    } catch (const InvalidInput& e) {
      throw ValidationError("world[" + std::to_string(i) + "]", e.what());
    }
  }
  if (!spec.bounds.min.allFinite() || !spec.bounds.max.allFinite() ||
      !(spec.bounds.min.array() < spec.bounds.max.array()).all())
    throw ValidationError("bounds", "requires finite min < max");
  if (!(spec.drone_radius > 0.0) || !std::isfinite(spec.drone_radius))
    throw ValidationError("drone_radius", "must be positive");
  const auto& l = spec.limits;
  if (!(l.v_max > 0.0) || !(l.a_max > 0.0) || !(l.yaw_rate_max > 0.0) || !std::isfinite(l.v_max) ||
      !std::isfinite(l.a_max) || !std::isfinite(l.yaw_rate_max))
    throw ValidationError("limits", "v_max, a_max and yaw_rate_max must be positive");
  if (!(spec.plant.tau >= 0.0) || !(spec.plant.k_p >= 0.0) || !std::isfinite(spec.plant.tau) ||
      !std::isfinite(spec.plant.k_p))
    throw ValidationError("plant", "tau and k_p must be non-negative");
  try {
    validate(spec.camera);
  } catch (const InvalidInput& e) {
    throw ValidationError("camera", e.what());
  }

  auto check_point = [&](const Vec3& p, double yaw, const std::string& field) {
    if (!p.allFinite() || !std::isfinite(yaw)) throw ValidationError(field, "must be finite");
    if (!(yaw >= -kPi && yaw < kPi)) throw ValidationError(field, "yaw outside [-pi, pi)");
    if (!inside(spec.bounds, p)) throw ValidationError(field, "outside bounds");
    if (signed_distance(spec.world, p) < spec.drone_radius)
      throw ValidationError(field, "clearance below drone radius");
  };
  check_point(spec.start.position, spec.start.yaw, "start");
  if (spec.goals.empty()) throw ValidationError("goals", "at least one goal required");
  for (std::size_t i = 0; i < spec.goals.size(); ++i) {
    const std::string field = "goals[" + std::to_string(i) + "]";
    check_point(spec.goals[i].position, spec.goals[i].yaw, field);
    if (!(spec.goals[i].success_radius > 0.0)) throw ValidationError(field + ".success_radius", "must be positive");
  }
}

ScenarioSpec load_scenario(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }

  check_keys(doc, "", {"name", "seed", "world", "start", "goals", "instruction", "limits", "camera", "bounds",
                       "drone_radius", "plant"});

  ScenarioSpec spec;
  if (auto it = doc.find("name"); it != doc.end()) {
    if (!it->is_string()) throw ValidationError("name", "expected a string");
    spec.name = it->get<std::string>();
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned()) throw ValidationError("seed", "expected an unsigned integer");
    spec.seed = it->get<std::uint64_t>();
  }
  if (auto it = doc.find("instruction"); it != doc.end()) {
    if (!it->is_string()) throw ValidationError("instruction", "expected a string");
    spec.instruction = it->get<std::string>();
  }

  const auto& world = require(doc, "world", "world");
  if (!world.is_array()) throw ValidationError("world", "expected an array");
  for (std::size_t i = 0; i < world.size(); ++i)
    spec.world.push_back(parse_primitive(world[i], "world[" + std::to_string(i) + "]"));

  const auto start = vector_n<4>(require(doc, "start", "start"), "start");
  spec.start = Pose4D(start.head<3>(), wrap_yaw(start[3]));

  const auto& goals = require(doc, "goals", "goals");
  if (!goals.is_array()) throw ValidationError("goals", "expected an array");
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const std::string field = "goals[" + std::to_string(i) + "]";
    check_keys(goals[i], field, {"position", "yaw", "success_radius"});
    Goal g;
    g.position = vector_n<3>(require(goals[i], "position", field + ".position"), field + ".position");
    g.yaw = wrap_yaw(optional_number(goals[i], "yaw", 0.0, field + ".yaw"));
    g.success_radius = optional_number(goals[i], "success_radius", g.success_radius, field + ".success_radius");
    spec.goals.push_back(g);
  }

  if (auto it = doc.find("limits"); it != doc.end()) {
    check_keys(*it, "limits", {"v_max", "a_max", "yaw_rate_max"});
    spec.limits.v_max = optional_number(*it, "v_max", spec.limits.v_max, "limits.v_max");
    spec.limits.a_max = optional_number(*it, "a_max", spec.limits.a_max, "limits.a_max");
    spec.limits.yaw_rate_max = optional_number(*it, "yaw_rate_max", spec.limits.yaw_rate_max, "limits.yaw_rate_max");
  }
  if (auto it = doc.find("camera"); it != doc.end()) {
    check_keys(*it, "camera", {"width", "height", "fx", "fy", "cx", "cy", "min_range", "max_range"});
    auto& c = spec.camera;
    for (const char* key : {"width", "height"}) {
      if (auto f = it->find(key); f != it->end()) {
        if (!f->is_number_integer()) throw ValidationError(std::string("camera.") + key, "expected an integer");
        (std::string(key) == "width" ? c.width : c.height) = f->get<int>();
      }
    }
    c.fx = optional_number(*it, "fx", c.fx, "camera.fx");
    c.fy = optional_number(*it, "fy", c.fy, "camera.fy");
    c.cx = optional_number(*it, "cx", 0.5 * (c.width - 1), "camera.cx");
    c.cy = optional_number(*it, "cy", 0.5 * (c.height - 1), "camera.cy");
    c.min_range = optional_number(*it, "min_range", c.min_range, "camera.min_range");
    c.max_range = optional_number(*it, "max_range", c.max_range, "camera.max_range");
  }
  if (auto it = doc.find("bounds"); it != doc.end()) {
    check_keys(*it, "bounds", {"min", "max"});
    spec.bounds.min = vector_n<3>(require(*it, "min", "bounds.min"), "bounds.min");
    spec.bounds.max = vector_n<3>(require(*it, "max", "bounds.max"), "bounds.max");
  }
  spec.drone_radius = optional_number(doc, "drone_radius", spec.drone_radius, "drone_radius");
  if (auto it = doc.find("plant"); it != doc.end()) {
    check_keys(*it, "plant", {"tau", "k_p"});
    spec.plant.tau = optional_number(*it, "tau", spec.plant.tau, "plant.tau");
    spec.plant.k_p = optional_number(*it, "k_p", spec.plant.k_p, "plant.k_p");
  }

  validate(spec);
  return spec;
}

ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open scenario '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return load_scenario(buffer.str());
}

std::string serialize_scenario(const ScenarioSpec& spec) {
  json doc;
  doc["name"] = spec.name;
  doc["seed"] = spec.seed;
  doc["world"] = json::array();
  for (const auto& p : spec.world) doc["world"].push_back(to_json(p));
  doc["start"] = json::array({spec.start.position.x(), spec.start.position.y(), spec.start.position.z(),
                              spec.start.yaw});
  doc["goals"] = json::array();
  for (const auto& g : spec.goals)
    doc["goals"].push_back({{"position", to_json(g.position)}, {"yaw", g.yaw}, {"success_radius", g.success_radius}});
  doc["instruction"] = spec.instruction;
  doc["limits"] = {{"v_max", spec.limits.v_max}, {"a_max", spec.limits.a_max},
                   {"yaw_rate_max", spec.limits.yaw_rate_max}};
  const auto& c = spec.camera;
  doc["camera"] = {{"width", c.width}, {"height", c.height}, {"fx", c.fx},           {"fy", c.fy},
                   {"cx", c.cx},       {"cy", c.cy},         {"min_range", c.min_range}, {"max_range", c.max_range}};
  doc["bounds"] = {{"min", to_json(spec.bounds.min)}, {"max", to_json(spec.bounds.max)}};
  doc["drone_radius"] = spec.drone_radius;
  doc["plant"] = {{"tau", spec.plant.tau}, {"k_p", spec.plant.k_p}};
  return doc.dump(2);
}

}  // namespace aerialnav
