#pragma once

// Closed-loop flight: simulated LiDAR -> voxel map -> subgoal tracking -> DWA-3D ->
// rate-limited kinematics, with ground-truth collision checking.

#include "dwa3d/dwa.hpp"
#include "dwa3d/flight_log.hpp"
#include "dwa3d/global_planner.hpp"
#include "dwa3d/scene.hpp"
#include "dwa3d/voxel_map.hpp"

#include <chrono>
#include <functional>
#include <string>
#include <vector>

namespace dwa3d {

/// Spinning LiDAR: `azimuth_rays` per revolution on `elevation_planes` planes spread
/// evenly over the vertical field of view.
struct SensorModel {
  int azimuth_rays = 256;
  int elevation_planes = 32;
  double vertical_fov = deg2rad(90.0);
  double max_range = 6.0;

  void validate() const {
    if (azimuth_rays < 1 || elevation_planes < 1) throw std::invalid_argument("sensor ray counts must be >= 1");
    if (!(vertical_fov >= 0.0 && vertical_fov <= deg2rad(90.0) + 1e-12))
      throw std::invalid_argument("sensor vertical_fov must be within [0, 90] degrees");
    if (!(max_range > 0.0)) throw std::invalid_argument("sensor max_range must be > 0");
  }
};

struct Scan {
  std::vector<Vec3> hits;
  std::vector<Vec3> free_endpoints;  // no-return rays, at max range
};

inline Scan lidar_scan(const Scene& scene, const Vec3& origin, double yaw, const SensorModel& sensor,
                       double t = 0.0) {
  sensor.validate();
  Scan scan;
  scan.hits.reserve(static_cast<std::size_t>(sensor.azimuth_rays) * sensor.elevation_planes);
  std::vector<double> ce(sensor.elevation_planes), se(sensor.elevation_planes);
  for (int j = 0; j < sensor.elevation_planes; ++j) {
    const double el = sensor.elevation_planes == 1
                          ? 0.0
                          : -0.5 * sensor.vertical_fov + sensor.vertical_fov * j / (sensor.elevation_planes - 1);
    ce[j] = std::cos(el);
    se[j] = std::sin(el);
  }
  for (int i = 0; i < sensor.azimuth_rays; ++i) {
    const double az = yaw + 2.0 * kPi * i / sensor.azimuth_rays;
    const double ca = std::cos(az), sa = std::sin(az);
    for (int j = 0; j < sensor.elevation_planes; ++j) {
      const Vec3 d(ca * ce[j], sa * ce[j], se[j]);
      if (auto hit = scene.raycast(origin, d, sensor.max_range, t))
        scan.hits.push_back(origin + *hit * d);
      else
        scan.free_endpoints.push_back(origin + sensor.max_range * d);
    }
  }
  return scan;
}

/// Per-axis slew toward the command (at most a_max * T), clamp to the velocity limits,
/// then integrate the pose with the achieved velocities over T.
inline DroneState step_dynamics(const DroneState& s, const VelocityCommand& cmd, const Limits& l, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("control period must be > 0");
  auto slew = [](double cur, double target, double step) {
    return cur + std::clamp(target - cur, -step, step);
  };
  DroneState n = s;
  n.vx = std::clamp(slew(s.vx, cmd.vx, l.ax_max * T), 0.0, l.vx_max);
  n.vz = std::clamp(slew(s.vz, cmd.vz, l.az_max * T), -l.vz_max, l.vz_max);
  n.wz = std::clamp(slew(s.wz, cmd.wz, l.alpha_z_max * T), -l.wz_max, l.wz_max);
  const double yaw = s.yaw + n.wz * T;
  n.x = s.x + n.vx * T * std::cos(yaw);
  n.y = s.y + n.vx * T * std::sin(yaw);
  n.z = s.z + n.vz * T;
  n.yaw = normalize_yaw(yaw);
  return n;
}

struct TrackerState {
  int index = 0;  // current subgoal (0-based waypoint index)
  double switch_radius = 0.3;
  /// Also accept an intermediate waypoint once the drone is past the plane through it
  /// normal to the next path segment, so waypoints the local planner cannot reach (too
  /// close to an obstacle, or overshot in a turn) do not hold the flight.
  bool accept_passed = true;
};

/// Advances past every subgoal closer than the switch radius (or already passed); never
/// past the last one.
inline TrackerState update_tracker(TrackerState t, const DroneState& s, const std::vector<Vec3>& path) {
  if (path.empty()) throw std::invalid_argument("tracker needs a non-empty path");
  const int last = static_cast<int>(path.size()) - 1;
  t.index = std::clamp(t.index, 0, last);
  const Vec3 p = s.position();
  auto reached = [&](int i) {
    if ((path[i] - p).norm() < t.switch_radius) return true;
    return t.accept_passed && (p - path[i]).dot(path[i + 1] - path[i]) > 0.0;
  };
  while (t.index < last && reached(t.index)) ++t.index;
  return t;
}

struct FlightConfig {
  PlannerConfig planner;
  GlobalPlannerConfig global;
  PathVariant variant = PathVariant::SizeAware;
  std::string avoidance = "lateral";
  SensorModel sensor;
  double control_period = 0.1;
  double switch_radius = 0.3;
  bool accept_passed_waypoints = true;
  double goal_tolerance = 0.3;
  int stall_limit = 50;
  double timeout = 120.0;
  double map_resolution = 0.1;
  double map_margin = 0.3;  // map bounds extend this far beyond the arena
  LogOddsParams log_odds;
  bool takeoff_bubble = true;
};

/// Geometry and endpoints of one flight.
struct FlightSetup {
  std::string name;
  Vec3 bounds_lo, bounds_hi;
  Vec3 start;
  double start_yaw = 0.0;
  Vec3 goal;
  Scene scene;
};

/// What an observer sees after each scan integration.
struct CycleView {
  double t;
  const DroneState& state;
  const VoxelMap& map;
  const Scene& scene;
};

struct FlightHooks {
  std::function<void(const CycleView&)> on_cycle;
  std::function<void(double t, const PlanResult&)> on_plan;  // requests the full score table
};

/// Occupied voxels whose centers are farther than half a voxel diagonal from every
/// primitive at time t: obstacle evidence the map has not yet released.
inline std::size_t stale_occupied(const VoxelMap& map, const Scene& scene, double t) {
  std::size_t n = 0;
  const double tol = map.half_diagonal();
  for (std::size_t k = 0; k < map.size(); ++k)
    if (map.state_at(k) == Occupancy::Occupied && scene.clearance(map.center(map.unlinear(k)), t) > tol) ++n;
  return n;
}

inline FlightLog run_flight(const FlightSetup& setup, const FlightConfig& cfg, std::uint64_t seed,
                            const FlightHooks& hooks = {}) {
  using Clock = std::chrono::steady_clock;
  cfg.sensor.validate();
  const double T = cfg.control_period;
  if (!(T > 0.0)) throw std::invalid_argument("control period must be > 0");
  const double R = cfg.planner.beam.drone_radius;

  FlightLog log;
  log.header.scenario = setup.name;
  log.header.seed = seed;
  log.header.planner = to_string(cfg.variant);
  log.header.avoidance = cfg.avoidance;

  const Vec3 margin = Vec3::Constant(cfg.map_margin);
  VoxelMap map = VoxelMap::covering(setup.bounds_lo - margin, setup.bounds_hi + margin, cfg.map_resolution,
                                    cfg.log_odds);
  DroneState s;
  s.x = setup.start.x();
  s.y = setup.start.y();
  s.z = setup.start.z();
  s.yaw = normalize_yaw(setup.start_yaw);

  if (cfg.takeoff_bubble) map.seed_free_sphere(setup.start, cfg.planner.beam.r_search);
  const Scan first = lidar_scan(setup.scene, s.position(), s.yaw, cfg.sensor, 0.0);
  map.integrate_scan(s.position(), first.hits, first.free_endpoints);

  // Global path over the map seen from the start.
  Path path;
  if (cfg.variant == PathVariant::Naive) {
    path = plan_naive(setup.start, setup.goal, cfg.global);
  } else {
    GlobalPlannerConfig g = cfg.global;
    g.rng_seed = seed;
    g.policy = ObstaclePolicy::OccupiedOnly;
    g.bounds = std::make_pair(setup.bounds_lo, setup.bounds_hi);
    if (cfg.variant == PathVariant::NotSizeAware) g.safety_distance = 0.0;
    RrtResult r;
    try {
      r = plan_rrt_star(map, setup.start, setup.goal, g);
    } catch (const std::invalid_argument&) {
      r.failure = "endpoints not clear";
    }
    if (r.path) {
      path = *r.path;
    } else {
      path = plan_naive(setup.start, setup.goal, cfg.global);
      log.header.global_fallback = true;
    }
  }
  log.header.path = path.waypoints;

  TrackerState tracker{0, cfg.switch_radius, cfg.accept_passed_waypoints};
  const bool movers = setup.scene.has_motion();
  int stall = 0;
  bool first_cycle = true;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * T;
    FlightRecord rec;
    rec.t = t;
    rec.state = s;
    rec.clearance = setup.scene.clearance(s.position(), t);

    auto finish = [&](Outcome o) {
      if (movers && !rec.stale_occupied) rec.stale_occupied = stale_occupied(map, setup.scene, t);
      rec.subgoal = tracker.index;
      log.records.push_back(rec);
      log.outcome = o;
    };
    if (rec.clearance < R) {
      finish(Outcome::Collision);
      break;
    }
    if (t >= cfg.timeout) {
      finish(Outcome::Timeout);
      break;
    }

    if (!first_cycle) {
      const auto m0 = Clock::now();
      const Scan scan = lidar_scan(setup.scene, s.position(), s.yaw, cfg.sensor, t);
      if (map.contains(s.position())) map.integrate_scan(s.position(), scan.hits, scan.free_endpoints);
      rec.map_ms = std::chrono::duration<double, std::milli>(Clock::now() - m0).count();
    }
    first_cycle = false;
    if (movers) rec.stale_occupied = stale_occupied(map, setup.scene, t);
    if (hooks.on_cycle) hooks.on_cycle(CycleView{t, s, map, setup.scene});

    tracker = update_tracker(tracker, s, path.waypoints);
    rec.subgoal = tracker.index;
    const int last = static_cast<int>(path.waypoints.size()) - 1;
    if (tracker.index == last && (setup.goal - s.position()).norm() < cfg.goal_tolerance) {
      finish(Outcome::Success);
      break;
    }

    const auto p0 = Clock::now();
    const PlanResult plan_result =
        plan(s, path.waypoints[tracker.index], map, cfg.planner, static_cast<bool>(hooks.on_plan));
    rec.plan_ms = std::chrono::duration<double, std::milli>(Clock::now() - p0).count();
    if (hooks.on_plan) hooks.on_plan(t, plan_result);
    rec.planned = true;
    rec.command = plan_result.command;
    rec.candidates = plan_result.candidate_count;
    rec.admissible = plan_result.admissible_count;
    rec.no_admissible = plan_result.no_admissible;
    log.records.push_back(rec);

    stall = plan_result.no_admissible ? stall + 1 : 0;
    if (stall > cfg.stall_limit) {
      log.outcome = Outcome::Stall;
      break;
    }
    s = step_dynamics(s, plan_result.command, cfg.planner.limits, T);
  }
  log.summary = compute_summary(log.records);
  return log;
}

}  // namespace dwa3d
