#include "dwa3d/global_planner.hpp"

#include <gtest/gtest.h>

using namespace dwa3d;

namespace {

VoxelMap free_map() {
  VoxelMap m(Vec3(-3, -3, 0), 0.1, {60, 60, 30});
  m.fill(Occupancy::Free);
  return m;
}

// Occupies every cell whose center lies in [lo, hi].
void add_box(VoxelMap& m, const Vec3& lo, const Vec3& hi) {
  for (std::size_t k = 0; k < m.size(); ++k) {
    const Vec3 c = m.center(m.unlinear(k));
    if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all())
      m.set_state(m.unlinear(k), Occupancy::Occupied);
  }
}

double brute_clearance(const VoxelMap& m, const Vec3& a, const Vec3& b) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < m.size(); ++k)
    if (m.state_at(k) != Occupancy::Free)
      best = std::min(best, point_segment_distance(m.center(m.unlinear(k)), a, b));
  return best;
}

}  // namespace

TEST(GlobalPlanner, NaivePathIsStraightLine) {
  const Path p = plan_naive(Vec3(0, 0, 1), Vec3(4, 0, 1));
  ASSERT_EQ(p.waypoints.size(), 2u);
  EXPECT_EQ(p.waypoints[1], Vec3(4, 0, 1));
  EXPECT_EQ(p.variant, PathVariant::Naive);
  EXPECT_THROW(plan_naive(Vec3(1, 1, 1), Vec3(1, 1, 1)), std::invalid_argument);
}

TEST(GlobalPlanner, PathCostHandValues) {
  GlobalPlannerConfig c;
  c.k_height = 1.0;
  EXPECT_DOUBLE_EQ(path_cost({Vec3(0, 0, 1), Vec3(4, 0, 1)}, c), 4.0);
  EXPECT_DOUBLE_EQ(path_cost({Vec3(0, 0, 0), Vec3(0, 0, 2), Vec3(0, 3, 2)}, c), 7.0);
  c.k_height = 0.0;
  EXPECT_DOUBLE_EQ(path_cost({Vec3(0, 0, 0), Vec3(0, 0, 2), Vec3(0, 3, 2)}, c), 5.0);
  EXPECT_THROW(path_cost({Vec3(0, 0, 0)}, c), std::invalid_argument);
}

TEST(GlobalPlanner, SegmentClearCapsule) {
  VoxelMap m = free_map();
  EXPECT_TRUE(segment_clear(m, Vec3(-2, 0, 1), Vec3(2, 0, 1), 0.5));
  // One occupied cell whose center sits 0.3 m beside the segment midpoint.
  const GridIndex i = *m.index_of(Vec3(0.05, 0.35, 1.05));
  m.set_state(i, Occupancy::Occupied);
  const Vec3 a(-1, 0.05, 1.05), b(1, 0.05, 1.05);
  ASSERT_NEAR(brute_clearance(m, a, b), 0.3, 1e-12);
  EXPECT_FALSE(segment_clear(m, a, b, 0.5));
  EXPECT_TRUE(segment_clear(m, a, b, 0.2));
  EXPECT_TRUE(segment_clear(m, a, b, 0.0));
  const Vec3 c(-1, 0.35, 1.05), d(1, 0.35, 1.05);
  EXPECT_FALSE(segment_clear(m, c, d, 0.0));
}

TEST(GlobalPlanner, UnknownSpaceBlocksOnlyPessimisticPolicy) {
  VoxelMap m = free_map();
  m.set_state(*m.index_of(Vec3(0.05, 0.05, 1.05)), Occupancy::Unknown);
  const Vec3 a(-1, 0.05, 1.05), b(1, 0.05, 1.05);
  EXPECT_FALSE(segment_clear(m, a, b, 0.0));
  EXPECT_TRUE(segment_clear(m, a, b, 0.0, ObstaclePolicy::OccupiedOnly));
}

TEST(GlobalPlanner, EmptyMapCollapsesToStraightLine) {
  const VoxelMap m = free_map();
  GlobalPlannerConfig c;
  c.max_iterations = 500;
  const Vec3 s(-2, -2, 0.5), g(2, 1, 2.0);
  const RrtResult r = plan_rrt_star(m, s, g, c);
  ASSERT_TRUE(r.path);
  ASSERT_EQ(r.path->waypoints.size(), 2u);
  EXPECT_NEAR(r.path->cost, c.k_length * (g - s).norm() + c.k_height * 1.5, 1e-12);
}

TEST(GlobalPlanner, SizeAwarePathKeepsClearanceAroundWall) {
  VoxelMap m = free_map();
  add_box(m, Vec3(-0.15, -0.75, 0.0), Vec3(0.15, 0.75, 1.0));
  GlobalPlannerConfig c;
  c.max_iterations = 3000;
  const Vec3 s(-2.2, 0.05, 0.55), g(2.2, 0.05, 0.55);
  const RrtResult r = plan_rrt_star(m, s, g, c);
  ASSERT_TRUE(r.path) << r.failure;
  EXPECT_EQ(r.path->variant, PathVariant::SizeAware);
  const auto& w = r.path->waypoints;
  EXPECT_EQ(w.front(), s);
  EXPECT_EQ(w.back(), g);
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    EXPECT_NE(w[i], w[i + 1]);
    EXPECT_GT(brute_clearance(m, w[i], w[i + 1]), 0.5);
  }
  EXPECT_TRUE(path_clear(m, *r.path, 0.5));
  EXPECT_NEAR(r.path->cost, path_cost(w, c), 1e-9);
}

TEST(GlobalPlanner, BestCostIsMonotoneAndSeedDeterministic) {
  VoxelMap m = free_map();
  add_box(m, Vec3(-0.15, -0.75, 0.0), Vec3(0.15, 0.75, 1.0));
  GlobalPlannerConfig c;
  c.max_iterations = 1500;
  c.rng_seed = 42;
  const Vec3 s(-2.2, 0.05, 0.55), g(2.2, 0.05, 0.55);
  const RrtResult a = plan_rrt_star(m, s, g, c);
  const RrtResult b = plan_rrt_star(m, s, g, c);
  ASSERT_EQ(a.best_cost_history.size(), 1500u);
  for (std::size_t i = 1; i < a.best_cost_history.size(); ++i)
    ASSERT_LE(a.best_cost_history[i], a.best_cost_history[i - 1]);
  ASSERT_TRUE(a.path && b.path);
  EXPECT_EQ(a.path->waypoints, b.path->waypoints);
  c.rng_seed = 43;
  const RrtResult d = plan_rrt_star(m, s, g, c);
  ASSERT_TRUE(d.path);
}

TEST(GlobalPlanner, EnclosedGoalFails) {
  VoxelMap m = free_map();
  add_box(m, Vec3(0.5, 0.5, 0.5), Vec3(1.5, 1.5, 1.5));
  // Hollow out one cell inside the solid block and put the goal there.
  const Vec3 goal(1.05, 1.05, 1.05);
  m.set_state(*m.index_of(goal), Occupancy::Free);
  GlobalPlannerConfig c;
  c.safety_distance = 0.0;
  c.max_iterations = 300;
  const RrtResult r = plan_rrt_star(m, Vec3(-2, -2, 1), goal, c);
  EXPECT_FALSE(r.path);
  EXPECT_NE(r.failure.find("300"), std::string::npos);
}

TEST(GlobalPlanner, RejectsBadConfigAndBlockedEndpoints) {
  VoxelMap m = free_map();
  GlobalPlannerConfig c;
  c.goal_bias = 1.5;
  EXPECT_THROW(plan_rrt_star(m, Vec3(0, 0, 1), Vec3(1, 0, 1), c), std::invalid_argument);
  c = {};
  c.steer_step = 0.0;
  EXPECT_THROW(plan_rrt_star(m, Vec3(0, 0, 1), Vec3(1, 0, 1), c), std::invalid_argument);
  c = {};
  add_box(m, Vec3(0.9, -0.1, 0.9), Vec3(1.1, 0.1, 1.1));
  EXPECT_THROW(plan_rrt_star(m, Vec3(-1, 0, 1), Vec3(1.35, 0, 1), c), std::invalid_argument);
}

TEST(GlobalPlanner, ShortcutDropsVisibleInteriorPoints) {
  const std::vector<Vec3> w{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)};
  const auto all = shortcut(w, [](const Vec3&, const Vec3&) { return true; });
  EXPECT_EQ(all.size(), 2u);
  const auto none = shortcut(w, [](const Vec3&, const Vec3&) { return false; });
  EXPECT_EQ(none.size(), 4u);
}
