#include "dwa3d/dwa.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace dwa3d;

namespace {

VoxelMap free_map() {
  VoxelMap m(Vec3(-3, -3, -1), 0.1, {60, 60, 40});
  m.fill(Occupancy::Free);
  return m;
}

void add_box(VoxelMap& m, const Vec3& lo, const Vec3& hi, Occupancy s = Occupancy::Occupied) {
  for (std::size_t k = 0; k < m.size(); ++k) {
    const Vec3 c = m.center(m.unlinear(k));
    if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all()) m.set_state(m.unlinear(k), s);
  }
}

}  // namespace

TEST(Dwa, PredictPoseUsesNewYaw) {
  DroneState s;
  s.x = 1.0;
  s.z = 2.0;
  const Pose p = predict_pose(s, {0.3, 0.1, deg2rad(45.0)}, 1.0);
  EXPECT_DOUBLE_EQ(p.yaw, kPi / 4);
  EXPECT_NEAR(p.x, 1.0 + 0.3 * std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(p.y, 0.3 * std::sqrt(0.5), 1e-15);
  EXPECT_DOUBLE_EQ(p.z, 2.1);
}

TEST(Dwa, HoverSearchSpaceSize) {
  const SearchSpace sp = build_search_space(DroneState{}, Limits{}, VelocitySteps{}, 1.0);
  EXPECT_EQ(sp.vx_values.size(), 7u);
  EXPECT_EQ(sp.vz_values.size(), 13u);
  EXPECT_EQ(sp.wz_values.size(), 37u);
  EXPECT_EQ(sp.candidates.size(), 7u * 13u * 37u);
  EXPECT_DOUBLE_EQ(sp.vx_values.front(), 0.0);
  EXPECT_DOUBLE_EQ(sp.vx_values.back(), 0.3);
  EXPECT_DOUBLE_EQ(sp.wz_values.front(), -deg2rad(45.0));
}

TEST(Dwa, WindowLimitedByAcceleration) {
  Limits l;
  l.ax_max = 0.1;
  DroneState s;
  s.vx = 0.22;
  const SearchSpace sp = build_search_space(s, l, VelocitySteps{}, 1.0);
  // [0.12, 0.3]: endpoints plus the interior lattice 0.15, 0.2, 0.25.
  ASSERT_EQ(sp.vx_values.size(), 5u);
  EXPECT_DOUBLE_EQ(sp.vx_values[0], 0.12);
  EXPECT_DOUBLE_EQ(sp.vx_values[4], 0.3);
}

// Property: every candidate respects the limits and the reachable window.
TEST(DwaProperty, CandidatesInsideWindow) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Limits l;
  for (int t = 0; t < 200; ++t) {
    DroneState s;
    s.vx = 0.15 + 0.15 * u(rng);
    s.vz = 0.3 * u(rng);
    s.wz = l.wz_max * u(rng);
    const double dt = 0.1 + 0.5 * (1 + u(rng));
    const SearchSpace sp = build_search_space(s, l, VelocitySteps{}, dt);
    ASSERT_FALSE(sp.candidates.empty());
    for (const auto& v : sp.candidates) {
      ASSERT_GE(v.vx, 0.0);
      ASSERT_LE(v.vx, l.vx_max);
      ASSERT_LE(std::abs(v.vz), l.vz_max);
      ASSERT_LE(std::abs(v.wz), l.wz_max);
      ASSERT_LE(std::abs(v.vx - s.vx), l.ax_max * dt + 1e-12);
      ASSERT_LE(std::abs(v.vz - s.vz), l.az_max * dt + 1e-12);
      ASSERT_LE(std::abs(v.wz - s.wz), l.alpha_z_max * dt + 1e-12);
    }
    std::set<std::tuple<double, double, double>> uniq;
    for (const auto& v : sp.candidates) uniq.insert({v.vx, v.vz, v.wz});
    ASSERT_EQ(uniq.size(), sp.candidates.size());
  }
}

TEST(Dwa, HeadPsiValues) {
  Pose p;
  EXPECT_DOUBLE_EQ(head_psi(p, Vec3(1, 0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(head_psi(p, Vec3(-1, 0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(head_psi(p, Vec3(0, 1, 0)), 0.5);
  EXPECT_DOUBLE_EQ(head_psi(p, Vec3(0, 0, 5)), 1.0);  // goal straight above
  p.yaw = 3.0;
  EXPECT_NEAR(head_psi(p, Vec3(-1, 0, 0)), 1.0 - (kPi - 3.0) / kPi, 1e-15);
}

TEST(Dwa, HeadZNormalizesOverBatch) {
  const std::vector<double> z{1.0, 1.5, 2.0};
  const auto h = head_z_batch(z, 2.0);
  EXPECT_DOUBLE_EQ(h[0], 0.0);
  EXPECT_DOUBLE_EQ(h[1], 0.5);
  EXPECT_DOUBLE_EQ(h[2], 1.0);
  const std::vector<double> same{1.0, 1.0};
  for (double v : head_z_batch(same, 1.0)) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_THROW(head_z_batch({}, 0.0), std::invalid_argument);
}

TEST(Dwa, RayLengthShrinksTowardBeamEdges) {
  const BeamParams b;
  EXPECT_DOUBLE_EQ(ray_length(0, 0, b), 1.0);
  EXPECT_DOUBLE_EQ(ray_length(b.psi_max, 0, b), 0.5);
  EXPECT_DOUBLE_EQ(ray_length(0, -b.theta_max, b), 0.25);
  EXPECT_DOUBLE_EQ(ray_length(b.psi_max, b.theta_max, b), 0.125);
}

TEST(Dwa, BeamAnglesAreSymmetric) {
  const auto a = beam_angles(deg2rad(90), deg2rad(10));
  ASSERT_EQ(a.size(), 19u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], -a[a.size() - 1 - i]);
  EXPECT_EQ(a[9], 0.0);
}

TEST(Dwa, DistanceTermFreeSpaceAndWall) {
  VoxelMap m = free_map();
  const BeamParams b;
  Pose p;
  p.z = 1.0;
  EXPECT_DOUBLE_EQ(distance_term(p, {0.3, 0, 0}, m, b), 1.0);
  // Wall face at x = 0.7: the central ray enters it at 0.7.
  add_box(m, Vec3(0.7, -3, -1), Vec3(1.5, 3, 3));
  EXPECT_NEAR(distance_term(p, {0.3, 0, 0}, m, b), (0.7 - 0.4) / 0.6, 1e-12);
  // Facing away, the short rear-side rays cannot reach it.
  p.yaw = kPi;
  EXPECT_DOUBLE_EQ(distance_term(p, {0.3, 0, 0}, m, b), 1.0);
}

TEST(Dwa, DistanceTermMatchesOracleOnRandomMaps) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const BeamParams b;
  for (int t = 0; t < 40; ++t) {
    VoxelMap m = oracle::random_map(rng, Vec3(-2, -2, 0), {40, 40, 20}, 0.1, 0.02, 0.01);
    Pose p{-0.5 + u(rng), -0.5 + u(rng), 0.5 + u(rng), kPi * (2 * u(rng) - 1)};
    VelocityCommand v{0.3 * u(rng), 0.3 * (2 * u(rng) - 1), 0.0};
    double dmin = b.r_search;
    for (double a : beam_angles(b.psi_max, b.delta_psi))
      for (double th : beam_angles(b.theta_max, b.delta_theta)) {
        const double yaw = a + p.yaw, el = th + std::atan2(v.vz, v.vx);
        const Vec3 d(std::cos(yaw) * std::cos(el), std::sin(yaw) * std::cos(el), std::sin(el));
        const auto h = oracle::raycast(m, p.position(), d, ray_length(a, th, b));
        if (h.hit) dmin = std::min(dmin, h.distance);
      }
    const double want = std::max(0.0, (dmin - b.drone_radius) / (b.r_search - b.drone_radius));
    ASSERT_NEAR(distance_term(p, v, m, b), want, 1e-9) << t;
  }
}

TEST(Dwa, VelocityTermGate) {
  const Limits l;
  ObjectiveWeights w = lateral_avoidance();
  EXPECT_DOUBLE_EQ(velocity_term({0.15, 0, 0}, 0.1, w, l), 0.5);
  w = vertical_avoidance();
  EXPECT_DOUBLE_EQ(velocity_term({0.15, 0, 0}, 0.5, w, l), 0.0);
  EXPECT_DOUBLE_EQ(velocity_term({0.15, 0, 0}, 0.51, w, l), 0.5);
}

TEST(Dwa, AdmissibilityUsesBrakingDistance) {
  VoxelMap m = free_map();
  const Limits l;
  add_box(m, Vec3(0.5, -3, -1), Vec3(1.5, 3, 3));
  // Pose on a row of cell centers: the nearest wall center is 0.55 away, d_col = 0.15.
  Pose p{0.0, 0.05, 1.05, 0.0};
  const double vmax = std::sqrt(2 * 0.15 * l.a_brake_max);
  EXPECT_TRUE(is_admissible({vmax - 1e-6, 0, 0}, p, m, l, 0.4, 1.0));
  EXPECT_FALSE(is_admissible({vmax + 1e-6, 0, 0}, p, m, l, 0.4, 1.0));
  EXPECT_TRUE(is_admissible({0, 0, 0.5}, p, m, l, 0.4, 1.0));  // hovering is always admissible
  p.x = 0.45;  // inside the wall region's neighborhood: d_col = 0
  EXPECT_FALSE(is_admissible({0.01, 0, 0}, p, m, l, 0.4, 1.0));
}

TEST(Dwa, StopsWhenNothingIsAdmissible) {
  VoxelMap m(Vec3(-3, -3, -1), 0.1, {60, 60, 40});  // all unknown
  DroneState s;
  s.z = 1.0;
  s.vx = 0.2;
  PlannerConfig cfg;
  cfg.limits.ax_max = 0.1;  // cannot brake to zero within one horizon
  const PlanResult r = plan(s, Vec3(2, 0, 1), m, cfg);
  EXPECT_TRUE(r.no_admissible);
  EXPECT_EQ(r.command, VelocityCommand{});
  EXPECT_EQ(r.admissible_count, 0u);
}

TEST(Dwa, RejectsInvalidWeights) {
  PlannerConfig cfg;
  cfg.weights.gamma = 0.2;
  EXPECT_THROW(plan(DroneState{}, Vec3(1, 0, 0), free_map(), cfg), std::invalid_argument);
}

TEST(Dwa, OpenSpaceFlightHeadsForGoal) {
  const VoxelMap m = free_map();
  DroneState s;
  s.z = 1.0;
  const PlanResult r = plan(s, Vec3(2, 0, 1), m, PlannerConfig{});
  EXPECT_FALSE(r.no_admissible);
  EXPECT_DOUBLE_EQ(r.command.vx, 0.3);
  EXPECT_DOUBLE_EQ(r.command.vz, 0.0);
  EXPECT_DOUBLE_EQ(r.command.wz, 0.0);
}

TEST(Dwa, TableScoresAreConsistent) {
  std::mt19937_64 rng(2);
  VoxelMap m = oracle::random_map(rng, Vec3(-3, -3, -1), {60, 60, 40}, 0.1, 0.01, 0.0);
  DroneState s;
  s.z = 1.0;
  PlannerConfig cfg;
  const PlanResult r = plan(s, Vec3(2, 1, 1.5), m, cfg);
  ASSERT_EQ(r.table.size(), r.candidate_count);
  std::size_t admissible = 0;
  for (const auto& row : r.table) {
    if (!row.admissible) continue;
    ++admissible;
    EXPECT_GE(row.dist, 0.0);
    EXPECT_LE(row.dist, 1.0);
    EXPECT_DOUBLE_EQ(row.g, objective(cfg.weights, row.head_psi, row.head_z, row.dist, row.vel));
    EXPECT_NEAR(row.dist, distance_term(row.predicted, row.command, m, cfg.beam), 1e-12);
  }
  EXPECT_EQ(admissible, r.admissible_count);
}

TEST(Dwa, ArgmaxMatchesBruteForceOracle) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 8; ++t) {
    VoxelMap m = oracle::random_map(rng, Vec3(-2, -2, 0), {40, 40, 20}, 0.1, 0.01, 0.005);
    DroneState s{u(rng) - 0.5, u(rng) - 0.5, 0.8 + 0.4 * u(rng), kPi * (2 * u(rng) - 1),
                 0.3 * u(rng), 0.3 * (2 * u(rng) - 1), deg2rad(45) * (2 * u(rng) - 1)};
    m.seed_free_sphere(s.position(), 0.0001);
    PlannerConfig cfg;
    if (t % 2) cfg.weights = vertical_avoidance();
    const Vec3 goal(4 * u(rng) - 2, 4 * u(rng) - 2, 2 * u(rng));
    const PlanResult got = plan(s, goal, m, cfg);
    const PlanResult pruned = plan(s, goal, m, cfg, /*keep_table=*/false);
    const oracle::BruteResult want = oracle::plan(s, goal, m, cfg);
    ASSERT_EQ(got.no_admissible, !want.best.has_value());
    ASSERT_EQ(pruned.no_admissible, got.no_admissible);
    EXPECT_EQ(pruned.admissible_count, got.admissible_count);
    if (want.best) {
      EXPECT_EQ(got.command, *want.best) << "instance " << t;
      EXPECT_EQ(pruned.command, *want.best) << "instance " << t;
    }
  }
}
