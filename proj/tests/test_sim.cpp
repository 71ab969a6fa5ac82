#include "dwa3d/scenarios.hpp"
#include "dwa3d/sim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dwa3d;

namespace {

// Hand-written distances for axis-aligned boxes and vertical cylinders, kept apart from
// the scene code on purpose.
double box_distance(const Vec3& c, const Vec3& size, const Vec3& p) {
  const Vec3 q = (p - c).cwiseAbs() - 0.5 * size;
  const double out = q.cwiseMax(0.0).norm();
  return out + std::min(q.maxCoeff(), 0.0);
}
double cylinder_distance(const Vec3& c, double r, double h, const Vec3& p) {
  const double dr = std::hypot(p.x() - c.x(), p.y() - c.y()) - r;
  const double dz = std::abs(p.z() - c.z()) - 0.5 * h;
  return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0)) + std::min(std::max(dr, dz), 0.0);
}

SensorModel single_ray() {
  SensorModel s;
  s.azimuth_rays = 1;
  s.elevation_planes = 1;
  return s;
}

FlightLog without_timing(FlightLog log) {
  for (auto& r : log.records) r.plan_ms = r.map_ms = 0.0;
  log.summary.plan_ms = {};
  return log;
}

}  // namespace

TEST(Lidar, EmptySceneReturnsNoHits) {
  const Scan s = lidar_scan(Scene{}, Vec3(0, 0, 1), 0.0, SensorModel{});
  EXPECT_TRUE(s.hits.empty());
  EXPECT_EQ(s.free_endpoints.size(), std::size_t(256 * 32));
}

TEST(Lidar, UnitBoxFaceTwoMetersAhead) {
  const Scene scene({make_box(Vec3(2.5, 0, 1), Vec3::Ones())});
  const Scan s = lidar_scan(scene, Vec3(0, 0, 1), 0.0, single_ray());
  ASSERT_EQ(s.hits.size(), 1u);
  EXPECT_NEAR((s.hits[0] - Vec3(0, 0, 1)).norm(), 2.0, 1e-6);
}

TEST(Lidar, RingHitFromInsideIsWithinChordError) {
  const double major = 0.8, tube = 0.05;
  const Scene scene({make_ring(Vec3(0, 0, 1.5), 0.0, major, tube)});
  // The ring axis is x, so rays in the y-z plane hit the tube from inside.
  const double near = major - tube;
  const double far = near / std::cos(kPi / kRingSegments);
  for (int k = 0; k < 64; ++k) {
    const double phi = 2.0 * kPi * k / 64;
    const Vec3 d(0.0, std::cos(phi), std::sin(phi));
    const auto hit = scene.raycast(Vec3(0, 0, 1.5), d, 5.0, 0.0);
    ASSERT_TRUE(hit) << "phi " << phi;
    EXPECT_GE(*hit, near - 1e-9);
    EXPECT_LE(*hit, far + 1e-9);
  }
  // Straight at a segment center the hit is exact.
  EXPECT_NEAR(*scene.raycast(Vec3(0, 0, 1.5), Vec3(0, 1, 0), 5.0, 0.0), near, 1e-12);
}

TEST(Lidar, HitsLieOnSurfacesAndNothingIsCrossedBefore) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.5, 2.5), sz(0.2, 1.0);
  struct Ref {
    bool box;
    Vec3 c, size;
  };
  std::vector<ScenePrimitive> prims;
  std::vector<Ref> refs;
  for (int i = 0; i < 8; ++i) {
    Vec3 c(u(rng), u(rng), 0.5 + 0.5 * (u(rng) + 2.5));
    if ((c - Vec3(0, 0, 1.5)).norm() < 1.2) c.x() += 2.0;  // keep the sensor outside
    if (i % 2 == 0) {
      const Vec3 s(sz(rng), sz(rng), sz(rng));
      prims.push_back(make_box(c, s));
      refs.push_back({true, c, s});
    } else {
      const double r = 0.5 * sz(rng), h = 2.0 * sz(rng);
      prims.push_back(make_cylinder(c, r, h));
      refs.push_back({false, c, Vec3(r, h, 0)});
    }
  }
  auto dist = [&](const Vec3& p) {
    double best = 1e9;
    for (const auto& r : refs)
      best = std::min(best, r.box ? box_distance(r.c, r.size, p) : cylinder_distance(r.c, r.size[0], r.size[1], p));
    return best;
  };
  const Scene scene(prims);
  const Vec3 o(0, 0, 1.5);
  SensorModel sensor;
  sensor.azimuth_rays = 64;
  sensor.elevation_planes = 16;
  const Scan scan = lidar_scan(scene, o, 0.3, sensor);
  ASSERT_FALSE(scan.hits.empty());
  for (const Vec3& h : scan.hits) {
    EXPECT_NEAR(dist(h), 0.0, 1e-9);
    const double len = (h - o).norm();
    const Vec3 d = (h - o) / len;
    for (double t = 0.0; t < len - 1e-3; t += 0.01) ASSERT_GT(dist(o + t * d), 0.0) << "crossed before the hit";
  }
  for (const Vec3& f : scan.free_endpoints) {
    const Vec3 d = (f - o).normalized();
    for (double t = 0.0; t <= sensor.max_range; t += 0.01) ASSERT_GT(dist(o + t * d), 0.0);
  }
}

TEST(Dynamics, SlewFromHover) {
  DroneState s;
  const DroneState n = step_dynamics(s, {0.3, 0.0, 0.0}, Limits{}, 0.1);
  EXPECT_NEAR(n.vx, 0.1, 1e-12);
  EXPECT_NEAR(n.x, 0.01, 1e-12);
  EXPECT_EQ(n.y, 0.0);
}

TEST(Dynamics, MatchingCommandIsUniformMotion) {
  DroneState s;
  s.vx = 0.2;
  s.vz = 0.1;
  s.wz = 0.3;
  s.yaw = 0.5;
  const DroneState n = step_dynamics(s, {0.2, 0.1, 0.3}, Limits{}, 0.1);
  const double yaw = 0.5 + 0.03;
  EXPECT_NEAR(n.x, 0.02 * std::cos(yaw), 1e-15);
  EXPECT_NEAR(n.y, 0.02 * std::sin(yaw), 1e-15);
  EXPECT_NEAR(n.z, 0.01, 1e-15);
  EXPECT_NEAR(n.yaw, yaw, 1e-15);
}

TEST(Dynamics, CommandBeyondLimitSaturates) {
  DroneState s;
  s.vx = 0.3;
  s.wz = Limits{}.wz_max;
  const DroneState n = step_dynamics(s, {5.0, -5.0, 5.0}, Limits{}, 0.1);
  EXPECT_EQ(n.vx, 0.3);
  EXPECT_NEAR(n.vz, -0.1, 1e-12);
  EXPECT_EQ(n.wz, Limits{}.wz_max);
  EXPECT_THROW(step_dynamics(s, {}, Limits{}, 0.0), std::invalid_argument);
}

TEST(Tracker, FarSubgoalKeepsIndex) {
  const std::vector<Vec3> path{Vec3(0, 0, 1), Vec3(2, 0, 1), Vec3(4, 0, 1)};
  DroneState s;
  s.z = 1.0;
  EXPECT_EQ(update_tracker({1, 0.3, true}, s, path).index, 1);
}

TEST(Tracker, CloseSubgoalAdvances) {
  const std::vector<Vec3> path{Vec3(0, 0, 1), Vec3(2, 0, 1), Vec3(4, 0, 1)};
  DroneState s;
  s.x = 1.8;
  s.z = 1.0;
  EXPECT_EQ(update_tracker({1, 0.3, false}, s, path).index, 2);
}

TEST(Tracker, FinalWaypointIsNeverSkipped) {
  const std::vector<Vec3> path{Vec3(0, 0, 1), Vec3(2, 0, 1)};
  DroneState s;
  s.x = 2.0;
  s.z = 1.0;
  EXPECT_EQ(update_tracker({1, 0.3, true}, s, path).index, 1);
  s.x = 5.0;  // far beyond the goal
  EXPECT_EQ(update_tracker({0, 0.3, true}, s, path).index, 1);
}

TEST(Tracker, PassedWaypointIsAcceptedOnlyWhenEnabled) {
  const std::vector<Vec3> path{Vec3(0, 0, 1), Vec3(2, 0, 1), Vec3(2, 3, 1)};
  DroneState s;
  s.x = 2.0;
  s.y = 0.6;  // 0.6 m from waypoint 1 but past the plane normal to the next segment
  s.z = 1.0;
  EXPECT_EQ(update_tracker({1, 0.3, true}, s, path).index, 2);
  EXPECT_EQ(update_tracker({1, 0.3, false}, s, path).index, 1);
  EXPECT_THROW(update_tracker({}, s, {}), std::invalid_argument);
}

TEST(Flight, EmptySceneNaiveReachesGoalMonotonically) {
  FlightSetup setup;
  setup.name = "empty";
  setup.bounds_lo = Vec3(-3, -3, 0);
  setup.bounds_hi = Vec3(3, 3, 3);
  setup.start = Vec3(-1.5, 0, 1);
  setup.goal = Vec3(1.5, 0, 1);
  FlightConfig cfg;
  cfg.variant = PathVariant::Naive;
  const FlightLog log = run_flight(setup, cfg, 1);
  ASSERT_EQ(log.outcome, Outcome::Success);
  double prev = 1e9;
  for (const auto& r : log.records) {
    const double d = (r.state.position() - setup.goal).norm();
    EXPECT_LE(d, prev + 1e-12);
    prev = d;
  }
}

class ScenarioFlight : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const ScenarioSpec spec = builtin("wall");
    cfg_ = make_flight_config(spec, PathVariant::SizeAware, "lateral");
    setup_ = make_setup(spec);
    log_ = run_flight(setup_, cfg_, 3);
  }
  static inline FlightSetup setup_;
  static inline FlightConfig cfg_;
  static inline FlightLog log_;
};

TEST_F(ScenarioFlight, VelocityChangesRespectAccelerationLimits) {
  const Limits& l = cfg_.planner.limits;
  const double T = cfg_.control_period;
  ASSERT_GT(log_.records.size(), 10u);
  for (std::size_t i = 1; i < log_.records.size(); ++i) {
    const DroneState& a = log_.records[i - 1].state;
    const DroneState& b = log_.records[i].state;
    EXPECT_LE(std::abs(b.vx - a.vx), l.ax_max * T + 1e-12);
    EXPECT_LE(std::abs(b.vz - a.vz), l.az_max * T + 1e-12);
    EXPECT_LE(std::abs(b.wz - a.wz), l.alpha_z_max * T + 1e-12);
    EXPECT_GE(b.vx, 0.0);
    EXPECT_LE(b.vx, l.vx_max);
  }
}

TEST_F(ScenarioFlight, RecordsAreTimeOrderedAndSummaryMatches) {
  for (std::size_t i = 1; i < log_.records.size(); ++i) EXPECT_GT(log_.records[i].t, log_.records[i - 1].t);
  EXPECT_EQ(log_.summary, compute_summary(log_.records));
  EXPECT_FALSE(log_.records.back().planned);
}

TEST_F(ScenarioFlight, SameSeedGivesIdenticalLog) {
  const FlightLog again = run_flight(setup_, cfg_, 3);
  EXPECT_EQ(without_timing(again), without_timing(log_));
}

TEST(Flight, StaleCountIsLoggedOnlyWithMovers) {
  ScenarioSpec spec = builtin("moving_stop");
  FlightConfig cfg = make_flight_config(spec, PathVariant::Naive, "lateral");
  cfg.timeout = 2.0;
  const FlightLog moving = run_flight(make_setup(spec), cfg, 1);
  EXPECT_EQ(moving.outcome, Outcome::Timeout);
  for (const auto& r : moving.records) EXPECT_TRUE(r.stale_occupied.has_value());

  spec.primitives.back().motion.reset();
  const FlightLog still = run_flight(make_setup(spec), cfg, 1);
  for (const auto& r : still.records) EXPECT_FALSE(r.stale_occupied.has_value());
}

TEST(Flight, StaleOccupiedCountsOnlyVoxelsAwayFromPrimitives) {
  VoxelMap map = VoxelMap::covering(Vec3(0, 0, 0), Vec3(1, 1, 1), 0.1);
  map.fill(Occupancy::Free);
  const Scene scene({make_box(Vec3(0.25, 0.5, 0.5), Vec3(0.1, 0.1, 0.1))});
  map.set_state(*map.index_of(Vec3(0.25, 0.5, 0.5)), Occupancy::Occupied);  // on the box
  map.set_state(*map.index_of(Vec3(0.85, 0.5, 0.5)), Occupancy::Occupied);  // nothing there
  EXPECT_EQ(stale_occupied(map, scene, 0.0), 1u);
}
