#pragma once

// Scenario documents: arena, endpoints, obstacles and per-scenario planner overrides.
// The on-disk format is JSON with a mandatory "schema_version"; docs/scenario_schema.md
// describes every field.

#include "dwa3d/config.hpp"
#include "dwa3d/config_io.hpp"
#include "dwa3d/global_planner.hpp"
#include "dwa3d/scene.hpp"
#include "dwa3d/sim.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace dwa3d {

inline constexpr int kScenarioSchema = 1;

struct ScenarioOverrides {
  std::optional<double> safety_distance;  // global planner clearance; default r_search / 2
  std::optional<double> r_search;
  std::optional<Limits> limits;
  std::optional<ObjectiveWeights> weights;  // k_psi / k_z are then set by the avoidance mode
  friend bool operator==(const ScenarioOverrides&, const ScenarioOverrides&) = default;
};

struct ScenarioSpec {
  std::string name;
  Vec3 bounds_lo = Vec3(-3.0, -3.0, 0.0);
  Vec3 bounds_hi = Vec3(3.0, 3.0, 6.0);
  Vec3 start = Vec3::Zero();
  double start_yaw = 0.0;
  Vec3 goal = Vec3::Zero();
  double goal_tolerance = 0.3;
  std::vector<ScenePrimitive> primitives;
  /// Global planner variants the layout is meant for, first one is the default.
  std::vector<PathVariant> variants{PathVariant::SizeAware, PathVariant::NotSizeAware, PathVariant::Naive};
  std::string avoidance = "lateral";  // default avoidance mode
  ScenarioOverrides overrides;
  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

class ScenarioError : public ConfigError {
 public:
  ScenarioError(std::string field, const std::string& what)
      : ConfigError("scenario field '" + field + "': " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// ---- primitive helpers (unused size components are zero so specs compare equal after a
// save/load cycle) ----

inline ScenePrimitive make_box(const Vec3& center, const Vec3& size, double yaw = 0.0) {
  return ScenePrimitive{PrimitiveKind::Box, center, yaw, size, std::nullopt};
}
inline ScenePrimitive make_cylinder(const Vec3& center, double radius, double height) {
  return ScenePrimitive{PrimitiveKind::Cylinder, center, 0.0, Vec3(radius, height, 0.0), std::nullopt};
}
inline ScenePrimitive make_ring(const Vec3& center, double yaw, double major, double tube) {
  return ScenePrimitive{PrimitiveKind::Ring, center, yaw, Vec3(major, tube, 0.0), std::nullopt};
}

inline PathVariant variant_from_string(const std::string& s) {
  if (s == "naive") return PathVariant::Naive;
  if (s == "rrt") return PathVariant::NotSizeAware;
  if (s == "rrt-size") return PathVariant::SizeAware;
  throw std::invalid_argument("unknown planner '" + s + "' (expected naive, rrt or rrt-size)");
}

inline bool valid_avoidance(const std::string& s) { return s == "lateral" || s == "vertical"; }

inline bool inside(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
}

/// Throws ScenarioError naming the first offending field.
inline void validate(const ScenarioSpec& s, double drone_radius = BeamParams{}.drone_radius) {
  if (s.name.empty()) throw ScenarioError("name", "must be non-empty");
  if (!all_finite(s.bounds_lo) || !all_finite(s.bounds_hi) || !(s.bounds_lo.array() < s.bounds_hi.array()).all())
    throw ScenarioError("bounds", "min must be below max on every axis");
  if (!all_finite(s.start) || !std::isfinite(s.start_yaw)) throw ScenarioError("start", "must be finite");
  if (!inside(s.start, s.bounds_lo, s.bounds_hi)) throw ScenarioError("start", "outside the arena bounds");
  if (!all_finite(s.goal)) throw ScenarioError("goal", "must be finite");
  if (!inside(s.goal, s.bounds_lo, s.bounds_hi)) throw ScenarioError("goal", "outside the arena bounds");
  if (!(s.goal_tolerance > 0.0) || !std::isfinite(s.goal_tolerance))
    throw ScenarioError("goal_tolerance", "must be positive");
  if ((s.goal - s.start).norm() <= s.goal_tolerance) throw ScenarioError("goal", "already reached at the start");
  for (std::size_t i = 0; i < s.primitives.size(); ++i) {
    try {
      s.primitives[i].validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError("primitives[" + std::to_string(i) + "]", e.what());
    }
  }
  if (s.variants.empty()) throw ScenarioError("planners", "must list at least one planner");
  if (!valid_avoidance(s.avoidance)) throw ScenarioError("avoidance", "must be 'lateral' or 'vertical'");
  const auto& o = s.overrides;
  if (o.safety_distance && !(*o.safety_distance >= 0.0)) throw ScenarioError("overrides.safety_distance", "must be >= 0");
  if (o.r_search && !(*o.r_search > drone_radius)) throw ScenarioError("overrides.r_search", "must exceed the drone radius");
  if (o.limits) {
    const auto r = validate_limits(*o.limits);
    if (!r.ok()) throw ScenarioError("overrides.limits", "all limits must be positive");
  }

  const Scene scene(s.primitives);
  if (scene.clearance(s.start, 0.0) < drone_radius)
    throw ScenarioError("start", "collides with an obstacle (clearance below the drone radius)");
  if (scene.clearance(s.goal, 0.0) < drone_radius)
    throw ScenarioError("goal", "collides with an obstacle (clearance below the drone radius)");
}

// ---- JSON ----

inline nlohmann::json to_json(const Motion& m) {
  nlohmann::json j = {{"velocity", io::vec_json(m.velocity)}, {"start_time", m.start_time}};
  if (m.travel_distance) j["travel_distance"] = *m.travel_distance;
  return j;
}

inline nlohmann::json to_json(const ScenePrimitive& p) {
  nlohmann::json j = {{"kind", to_string(p.kind)}, {"center", io::vec_json(p.center)}};
  switch (p.kind) {
    case PrimitiveKind::Box:
      j["size"] = io::vec_json(p.size);
      j["yaw"] = p.yaw;
      break;
    case PrimitiveKind::Cylinder:
      j["radius"] = p.size[0];
      j["height"] = p.size[1];
      break;
    case PrimitiveKind::Ring:
      j["major_radius"] = p.size[0];
      j["tube_radius"] = p.size[1];
      j["yaw"] = p.yaw;
      break;
  }
  if (p.motion) j["motion"] = to_json(*p.motion);
  return j;
}

inline nlohmann::json to_json(const ScenarioSpec& s) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : s.primitives) prims.push_back(to_json(p));
  nlohmann::json planners = nlohmann::json::array();
  for (auto v : s.variants) planners.push_back(to_string(v));
  nlohmann::json j = {{"schema_version", kScenarioSchema},
                      {"name", s.name},
                      {"bounds", {{"min", io::vec_json(s.bounds_lo)}, {"max", io::vec_json(s.bounds_hi)}}},
                      {"start", {{"position", io::vec_json(s.start)}, {"yaw", s.start_yaw}}},
                      {"goal", io::vec_json(s.goal)},
                      {"goal_tolerance", s.goal_tolerance},
                      {"primitives", prims},
                      {"planners", planners},
                      {"avoidance", s.avoidance}};
  nlohmann::json o = nlohmann::json::object();
  if (s.overrides.safety_distance) o["safety_distance"] = *s.overrides.safety_distance;
  if (s.overrides.r_search) o["r_search"] = *s.overrides.r_search;
  if (s.overrides.limits) o["limits"] = to_json(*s.overrides.limits);
  if (s.overrides.weights) o["weights"] = to_json(*s.overrides.weights);
  if (!o.empty()) j["overrides"] = o;
  return j;
}

namespace io {

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ScenarioError(path, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ScenarioError(path, "must be finite");
  return v;
}

inline Vec3 vec(const json& j, const std::string& path) {
  try {
    return read_vec(j, path);
  } catch (const ConfigError&) {
    throw ScenarioError(path, "must be an array of 3 finite numbers");
  }
}

inline const json& require(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ScenarioError(join(path, key), "missing");
  return j.at(key);
}

inline void expect_scenario_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ScenarioError(path.empty() ? "<root>" : path, "must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ScenarioError(join(path, key), "unknown field");
  }
}

}  // namespace io

inline Motion motion_from_json(const nlohmann::json& j, const std::string& path) {
  io::expect_scenario_keys(j, path, {"velocity", "start_time", "travel_distance"});
  Motion m;
  m.velocity = io::vec(io::require(j, path, "velocity"), io::join(path, "velocity"));
  if (j.contains("start_time")) m.start_time = io::number(j["start_time"], io::join(path, "start_time"));
  if (j.contains("travel_distance")) {
    m.travel_distance = io::number(j["travel_distance"], io::join(path, "travel_distance"));
    if (*m.travel_distance < 0.0) throw ScenarioError(io::join(path, "travel_distance"), "must be >= 0");
  }
  return m;
}

inline ScenePrimitive primitive_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ScenarioError(path, "must be an object");
  const auto& kind_j = io::require(j, path, "kind");
  const std::string kind = kind_j.is_string() ? kind_j.get<std::string>() : "";
  ScenePrimitive p;
  if (kind == "box") {
    io::expect_scenario_keys(j, path, {"kind", "center", "size", "yaw", "motion"});
    p = make_box(Vec3::Zero(), io::vec(io::require(j, path, "size"), io::join(path, "size")));
    if (j.contains("yaw")) p.yaw = io::number(j["yaw"], io::join(path, "yaw"));
  } else if (kind == "cylinder") {
    io::expect_scenario_keys(j, path, {"kind", "center", "radius", "height", "motion"});
    p = make_cylinder(Vec3::Zero(), io::number(io::require(j, path, "radius"), io::join(path, "radius")),
                      io::number(io::require(j, path, "height"), io::join(path, "height")));
  } else if (kind == "ring") {
    io::expect_scenario_keys(j, path, {"kind", "center", "major_radius", "tube_radius", "yaw", "motion"});
    p = make_ring(Vec3::Zero(), 0.0,
                  io::number(io::require(j, path, "major_radius"), io::join(path, "major_radius")),
                  io::number(io::require(j, path, "tube_radius"), io::join(path, "tube_radius")));
    if (j.contains("yaw")) p.yaw = io::number(j["yaw"], io::join(path, "yaw"));
  } else {
    throw ScenarioError(io::join(path, "kind"), "must be one of box, cylinder, ring");
  }
  p.center = io::vec(io::require(j, path, "center"), io::join(path, "center"));
  if (j.contains("motion")) p.motion = motion_from_json(j["motion"], io::join(path, "motion"));
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(path, e.what());
  }
  return p;
}

/// Parses and validates a scenario document. Omitted planner settings keep their defaults.
inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  io::expect_scenario_keys(j, "", {"schema_version", "name", "bounds", "start", "goal", "goal_tolerance",
                                   "primitives", "planners", "avoidance", "overrides"});
  const auto& ver = io::require(j, "", "schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != kScenarioSchema)
    throw ScenarioError("schema_version", "unsupported (expected " + std::to_string(kScenarioSchema) + ")");

  ScenarioSpec s;
  const auto& name = io::require(j, "", "name");
  if (!name.is_string()) throw ScenarioError("name", "must be a string");
  s.name = name.get<std::string>();

  const auto& b = io::require(j, "", "bounds");
  io::expect_scenario_keys(b, "bounds", {"min", "max"});
  s.bounds_lo = io::vec(io::require(b, "bounds", "min"), "bounds.min");
  s.bounds_hi = io::vec(io::require(b, "bounds", "max"), "bounds.max");

  const auto& st = io::require(j, "", "start");
  io::expect_scenario_keys(st, "start", {"position", "yaw"});
  s.start = io::vec(io::require(st, "start", "position"), "start.position");
  if (st.contains("yaw")) s.start_yaw = io::number(st["yaw"], "start.yaw");

  s.goal = io::vec(io::require(j, "", "goal"), "goal");
  if (j.contains("goal_tolerance")) s.goal_tolerance = io::number(j["goal_tolerance"], "goal_tolerance");

  if (j.contains("primitives")) {
    const auto& ps = j["primitives"];
    if (!ps.is_array()) throw ScenarioError("primitives", "must be an array");
    for (std::size_t i = 0; i < ps.size(); ++i)
      s.primitives.push_back(primitive_from_json(ps[i], "primitives[" + std::to_string(i) + "]"));
  }
  if (j.contains("planners")) {
    const auto& ps = j["planners"];
    if (!ps.is_array()) throw ScenarioError("planners", "must be an array");
    s.variants.clear();
    for (const auto& v : ps) {
      if (!v.is_string()) throw ScenarioError("planners", "entries must be strings");
      try {
        s.variants.push_back(variant_from_string(v.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ScenarioError("planners", e.what());
      }
    }
  }
  if (j.contains("avoidance")) {
    if (!j["avoidance"].is_string()) throw ScenarioError("avoidance", "must be a string");
    s.avoidance = j["avoidance"].get<std::string>();
  }
  if (j.contains("overrides")) {
    const auto& o = j["overrides"];
    io::expect_scenario_keys(o, "overrides", {"safety_distance", "r_search", "limits", "weights"});
    if (o.contains("safety_distance"))
      s.overrides.safety_distance = io::number(o["safety_distance"], "overrides.safety_distance");
    if (o.contains("r_search")) s.overrides.r_search = io::number(o["r_search"], "overrides.r_search");
    try {
      if (o.contains("limits")) {
        Limits l;
        from_json(o["limits"], "overrides.limits", l);
        s.overrides.limits = l;
      }
      if (o.contains("weights")) {
        ObjectiveWeights w;
        from_json(o["weights"], "overrides.weights", w);
        s.overrides.weights = w;
      }
    } catch (const ScenarioError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ScenarioError("overrides", e.what());
    }
  }
  validate(s);
  return s;
}

inline ScenarioSpec load_scenario(std::istream& is) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError("<document>", std::string("parse error: ") + e.what());
  }
  return scenario_from_json(j);
}

inline ScenarioSpec load_scenario_text(const std::string& text) {
  std::istringstream is(text);
  return load_scenario(is);
}

inline ScenarioSpec load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file '" + path + "'");
  return load_scenario(f);
}

inline std::string save_scenario(const ScenarioSpec& s) { return to_json(s).dump(2) + "\n"; }

// ---- built-in fixtures ----
//
// Arena 6 x 6 x 6 m with a floor slab under z = 0. Coordinates of the zigzag, narrow gap,
// ring and moving layouts are authored; each was checked by flying it before freezing.

namespace detail {

inline ScenarioSpec arena(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  s.primitives.push_back(make_box(Vec3(0.0, 0.0, -0.05), Vec3(6.6, 6.6, 0.1)));
  return s;
}

}  // namespace detail

inline const std::vector<std::string>& builtin_names() {
  static const std::vector<std::string> names{"wall",  "zigzag",      "narrow_gaps",      "rings_through",
                                              "rings_90", "moving_stop", "moving_continuous"};
  return names;
}

inline ScenarioSpec builtin(const std::string& name) {
  if (name == "wall") {
    // 1 m high, 1.5 m long, 0.3 m thick, standing on the floor between start and goal.
    ScenarioSpec s = detail::arena(name);
    s.start = Vec3(-2.2, 0.0, 0.6);
    s.goal = Vec3(2.2, 0.0, 0.6);
    s.primitives.push_back(make_box(Vec3(0.0, 0.0, 0.5), Vec3(0.3, 1.5, 1.0)));
    return s;
  }
  if (name == "zigzag") {
    ScenarioSpec s = detail::arena(name);
    s.start = Vec3(-2.8, 0.0, 1.0);
    s.goal = Vec3(2.8, 0.0, 1.0);
    for (int i = 0; i < 5; ++i) {
      const double y = (i % 2 == 0) ? -0.6 : 0.6;
      s.primitives.push_back(make_cylinder(Vec3(-2.0 + 1.0 * i, y, 1.0), 0.25, 2.0));
    }
    return s;
  }
  if (name == "narrow_gaps") {
    // Two rows of 0.3 m poles. Row A leaves 1.25 m gaps, row B 1.30 m and 1.35 m; a pole
    // of row B sits on the straight line, so every route threads at least two gaps.
    ScenarioSpec s = detail::arena(name);
    s.start = Vec3(-2.6, 0.0, 1.0);
    s.goal = Vec3(2.6, 0.0, 1.0);
    for (double y : {-2.4, -0.85, 0.7, 2.25}) s.primitives.push_back(make_cylinder(Vec3(-0.7, y, 1.25), 0.15, 2.5));
    for (double y : {-3.2, -1.6, 0.0, 1.65, 3.3})
      s.primitives.push_back(make_cylinder(Vec3(0.9, y, 1.25), 0.15, 2.5));
    Limits fast;
    fast.vx_max = 0.75;
    s.overrides.limits = fast;
    s.overrides.safety_distance = 0.2;
    return s;
  }
  if (name == "rings_through") {
    ScenarioSpec s = detail::arena(name);
    s.start = Vec3(-2.6, 0.0, 1.5);
    s.goal = Vec3(2.6, 0.0, 1.5);
    s.primitives.push_back(make_ring(Vec3(-0.8, 0.0, 1.5), 0.0, 0.8, 0.05));
    s.primitives.push_back(make_ring(Vec3(0.8, 0.0, 1.5), 0.0, 0.8, 0.05));
    s.overrides.safety_distance = 0.2;
    return s;
  }
  if (name == "rings_90") {
    // Through a ring along +x, then a left turn and out through a ring facing +y.
    ScenarioSpec s = detail::arena(name);
    s.start = Vec3(-2.6, 0.0, 1.5);
    s.goal = Vec3(0.6, 2.6, 1.5);
    s.primitives.push_back(make_ring(Vec3(-1.2, 0.0, 1.5), 0.0, 0.8, 0.05));
    s.primitives.push_back(make_ring(Vec3(0.6, 1.2, 1.5), kPi / 2.0, 0.8, 0.05));
    s.overrides.safety_distance = 0.2;
    return s;
  }
  if (name == "moving_stop" || name == "moving_continuous") {
    // A ground robot carrying a 1.5 m cylinder waits beside the flight line, then drives
    // across it at 0.3 m/s once the drone is under way; in moving_stop it halts on the line.
    ScenarioSpec s = detail::arena(name);
    s.start = Vec3(-2.5, 0.0, 1.0);
    s.goal = Vec3(2.5, 0.0, 1.0);
    ScenePrimitive ugv = make_cylinder(Vec3(1.2, -1.8, 0.75), 0.25, 1.5);
    Motion m;
    m.velocity = Vec3(0.0, 0.3, 0.0);
    m.start_time = 0.5;
    if (name == "moving_stop") m.travel_distance = 1.8;
    ugv.motion = m;
    s.primitives.push_back(ugv);
    s.overrides.r_search = 1.5;
    return s;
  }
  std::string valid;
  for (const auto& n : builtin_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown scenario '" + name + "' (valid: " + valid + ")");
}

inline bool is_builtin(const std::string& name) {
  for (const auto& n : builtin_names())
    if (n == name) return true;
  return false;
}

// ---- flight assembly ----

inline FlightSetup make_setup(const ScenarioSpec& s) {
  FlightSetup f;
  f.name = s.name;
  f.bounds_lo = s.bounds_lo;
  f.bounds_hi = s.bounds_hi;
  f.start = s.start;
  f.start_yaw = s.start_yaw;
  f.goal = s.goal;
  f.scene = Scene(s.primitives);
  return f;
}

/// Built-in defaults, then scenario overrides, then the avoidance mode and an optional
/// explicit r_search (highest precedence).
inline FlightConfig make_flight_config(const ScenarioSpec& s, PathVariant variant, const std::string& avoidance,
                                       std::optional<double> r_search = std::nullopt) {
  if (!valid_avoidance(avoidance))
    throw std::invalid_argument("unknown avoidance mode '" + avoidance + "' (expected lateral or vertical)");
  FlightConfig c;
  c.variant = variant;
  c.avoidance = avoidance;
  c.goal_tolerance = s.goal_tolerance;
  const auto& o = s.overrides;
  if (o.limits) c.planner.limits = *o.limits;
  if (o.weights) c.planner.weights = *o.weights;
  c.planner.weights =
      avoidance == "lateral" ? lateral_avoidance(c.planner.weights) : vertical_avoidance(c.planner.weights);
  if (o.r_search) c.planner.beam.r_search = *o.r_search;
  if (r_search) c.planner.beam.r_search = *r_search;
  c.global.safety_distance = o.safety_distance ? *o.safety_distance : 0.5 * c.planner.beam.r_search;
  return c;
}

}  // namespace dwa3d
