#pragma once

// JSON (de)serialization of planner, sensor and airframe parameters. Missing fields keep
// their defaults; unknown fields and wrong types are rejected with the field path.

#include "dwa3d/config.hpp"
#include "dwa3d/feasibility.hpp"
#include "dwa3d/global_planner.hpp"
#include "dwa3d/sim.hpp"

#include <json.hpp>

#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>

namespace dwa3d {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace io {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Throws when `j` is not an object or carries a key outside `allowed`.
inline void expect_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown field '" + join(path, key) + "'");
  }
}

template <class T>
void read(const json& j, const std::string& path, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("field '" + join(path, key) + "' has the wrong type");
  }
}

/// Reads an angle given in degrees into radians.
inline void read_deg(const json& j, const std::string& path, const char* key, double& out_rad) {
  if (!j.contains(key)) return;
  double deg = rad2deg(out_rad);
  read(j, path, key, deg);
  out_rad = deg2rad(deg);
}

inline Vec3 read_vec(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3 || !j[0].is_number() || !j[1].is_number() || !j[2].is_number())
    throw ConfigError("field '" + path + "' must be an array of 3 numbers");
  const Vec3 v(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  if (!all_finite(v)) throw ConfigError("field '" + path + "' must be finite");
  return v;
}
/// Degrees that convert back to `rad` exactly when such a double exists. Degree-to-radian
/// conversion rounds twice and skips some radians; those come back within one ulp.
inline double deg_for(double rad) {
  const double d = rad2deg(rad);
  double best = d, best_err = std::abs(deg2rad(d) - rad);
  double up = d, down = d;
  for (int i = 0; i < 16 && best_err > 0.0; ++i) {
    up = std::nextafter(up, std::numeric_limits<double>::infinity());
    down = std::nextafter(down, -std::numeric_limits<double>::infinity());
    for (double c : {up, down}) {
      const double err = std::abs(deg2rad(c) - rad);
      if (err < best_err) {
        best = c;
        best_err = err;
      }
    }
  }
  return best;
}

inline json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

}  // namespace io

// Angular quantities are written in degrees, everything else in SI units.

inline nlohmann::json to_json(const Limits& l) {
  return {{"vx_max", l.vx_max},           {"vz_max", l.vz_max},
          {"wz_max_deg", io::deg_for(l.wz_max)}, {"ax_max", l.ax_max},
          {"az_max", l.az_max},           {"alpha_z_max_deg", io::deg_for(l.alpha_z_max)},
          {"a_brake_max", l.a_brake_max}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, Limits& l) {
  io::expect_keys(j, path, {"vx_max", "vz_max", "wz_max_deg", "ax_max", "az_max", "alpha_z_max_deg", "a_brake_max"});
  io::read(j, path, "vx_max", l.vx_max);
  io::read(j, path, "vz_max", l.vz_max);
  io::read_deg(j, path, "wz_max_deg", l.wz_max);
  io::read(j, path, "ax_max", l.ax_max);
  io::read(j, path, "az_max", l.az_max);
  io::read_deg(j, path, "alpha_z_max_deg", l.alpha_z_max);
  io::read(j, path, "a_brake_max", l.a_brake_max);
}

inline nlohmann::json to_json(const ObjectiveWeights& w) {
  return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}, {"k_psi", w.k_psi}, {"k_z", w.k_z}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, ObjectiveWeights& w) {
  io::expect_keys(j, path, {"alpha", "beta", "gamma", "k_psi", "k_z"});
  io::read(j, path, "alpha", w.alpha);
  io::read(j, path, "beta", w.beta);
  io::read(j, path, "gamma", w.gamma);
  io::read(j, path, "k_psi", w.k_psi);
  io::read(j, path, "k_z", w.k_z);
}

inline nlohmann::json to_json(const BeamParams& b) {
  return {{"r_search", b.r_search},
          {"lambda_psi", b.lambda_psi},
          {"lambda_theta", b.lambda_theta},
          {"psi_max_deg", io::deg_for(b.psi_max)},
          {"theta_max_deg", io::deg_for(b.theta_max)},
          {"delta_psi_deg", io::deg_for(b.delta_psi)},
          {"delta_theta_deg", io::deg_for(b.delta_theta)},
          {"drone_radius", b.drone_radius},
          {"drone_height", b.drone_height}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, BeamParams& b) {
  io::expect_keys(j, path, {"r_search", "lambda_psi", "lambda_theta", "psi_max_deg", "theta_max_deg",
                            "delta_psi_deg", "delta_theta_deg", "drone_radius", "drone_height"});
  io::read(j, path, "r_search", b.r_search);
  io::read(j, path, "lambda_psi", b.lambda_psi);
  io::read(j, path, "lambda_theta", b.lambda_theta);
  io::read_deg(j, path, "psi_max_deg", b.psi_max);
  io::read_deg(j, path, "theta_max_deg", b.theta_max);
  io::read_deg(j, path, "delta_psi_deg", b.delta_psi);
  io::read_deg(j, path, "delta_theta_deg", b.delta_theta);
  io::read(j, path, "drone_radius", b.drone_radius);
  io::read(j, path, "drone_height", b.drone_height);
}

inline nlohmann::json to_json(const VelocitySteps& s) {
  return {{"vx", s.vx}, {"vz", s.vz}, {"wz_deg", io::deg_for(s.wz)}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, VelocitySteps& s) {
  io::expect_keys(j, path, {"vx", "vz", "wz_deg"});
  io::read(j, path, "vx", s.vx);
  io::read(j, path, "vz", s.vz);
  io::read_deg(j, path, "wz_deg", s.wz);
}

inline nlohmann::json to_json(const PlannerConfig& c) {
  return {{"limits", to_json(c.limits)},
          {"weights", to_json(c.weights)},
          {"beam", to_json(c.beam)},
          {"steps", to_json(c.steps)},
          {"dt", c.dt}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, PlannerConfig& c) {
  io::expect_keys(j, path, {"limits", "weights", "beam", "steps", "dt"});
  if (j.contains("limits")) from_json(j["limits"], io::join(path, "limits"), c.limits);
  if (j.contains("weights")) from_json(j["weights"], io::join(path, "weights"), c.weights);
  if (j.contains("beam")) from_json(j["beam"], io::join(path, "beam"), c.beam);
  if (j.contains("steps")) from_json(j["steps"], io::join(path, "steps"), c.steps);
  io::read(j, path, "dt", c.dt);
}

inline nlohmann::json to_json(const GlobalPlannerConfig& c) {
  return {{"k_length", c.k_length},
          {"k_height", c.k_height},
          {"safety_distance", c.safety_distance},
          {"max_iterations", c.max_iterations},
          {"steer_step", c.steer_step},
          {"goal_bias", c.goal_bias},
          {"rewire_radius", c.rewire_radius}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, GlobalPlannerConfig& c) {
  io::expect_keys(j, path, {"k_length", "k_height", "safety_distance", "max_iterations", "steer_step",
                            "goal_bias", "rewire_radius"});
  io::read(j, path, "k_length", c.k_length);
  io::read(j, path, "k_height", c.k_height);
  io::read(j, path, "safety_distance", c.safety_distance);
  io::read(j, path, "max_iterations", c.max_iterations);
  io::read(j, path, "steer_step", c.steer_step);
  io::read(j, path, "goal_bias", c.goal_bias);
  io::read(j, path, "rewire_radius", c.rewire_radius);
}

inline nlohmann::json to_json(const SensorModel& s) {
  return {{"azimuth_rays", s.azimuth_rays},
          {"elevation_planes", s.elevation_planes},
          {"vertical_fov_deg", io::deg_for(s.vertical_fov)},
          {"max_range", s.max_range}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, SensorModel& s) {
  io::expect_keys(j, path, {"azimuth_rays", "elevation_planes", "vertical_fov_deg", "max_range"});
  io::read(j, path, "azimuth_rays", s.azimuth_rays);
  io::read(j, path, "elevation_planes", s.elevation_planes);
  io::read_deg(j, path, "vertical_fov_deg", s.vertical_fov);
  io::read(j, path, "max_range", s.max_range);
}

inline nlohmann::json to_json(const AirframeParams& a) {
  return {{"mass", a.mass},
          {"rotor_count", a.rotor_count},
          {"g", a.g},
          {"theta_max_deg", io::deg_for(a.theta_max)},
          {"max_thrust_per_motor", a.max_thrust_per_motor}};
}
inline void from_json(const nlohmann::json& j, const std::string& path, AirframeParams& a) {
  io::expect_keys(j, path, {"mass", "rotor_count", "g", "theta_max_deg", "max_thrust_per_motor"});
  io::read(j, path, "mass", a.mass);
  io::read(j, path, "rotor_count", a.rotor_count);
  io::read(j, path, "g", a.g);
  io::read_deg(j, path, "theta_max_deg", a.theta_max);
  io::read(j, path, "max_thrust_per_motor", a.max_thrust_per_motor);
}

/// Snapshot of everything that shapes a flight, stored in log headers.
inline nlohmann::json to_json(const FlightConfig& c) {
  return {{"planner", to_json(c.planner)},
          {"global", to_json(c.global)},
          {"variant", to_string(c.variant)},
          {"avoidance", c.avoidance},
          {"sensor", to_json(c.sensor)},
          {"control_period", c.control_period},
          {"switch_radius", c.switch_radius},
          {"accept_passed_waypoints", c.accept_passed_waypoints},
          {"goal_tolerance", c.goal_tolerance},
          {"stall_limit", c.stall_limit},
          {"timeout", c.timeout},
          {"map_resolution", c.map_resolution},
          {"map_margin", c.map_margin},
          {"takeoff_bubble", c.takeoff_bubble}};
}

/// Document accepted by `check-config`: planner sections plus an optional airframe.
struct CheckConfigDocument {
  PlannerConfig planner;
  AirframeParams airframe;
};

inline CheckConfigDocument parse_check_config(const nlohmann::json& j) {
  io::expect_keys(j, "", {"limits", "weights", "beam", "steps", "dt", "airframe"});
  CheckConfigDocument d;
  nlohmann::json planner = j;
  planner.erase("airframe");
  from_json(planner, "", d.planner);
  if (j.contains("airframe")) from_json(j["airframe"], "airframe", d.airframe);
  return d;
}

}  // namespace dwa3d
