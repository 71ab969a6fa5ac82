#pragma once

// Waypoint planners: obstacle-blind straight line and RRT* with a capsule clearance check.

#include "dwa3d/obstacle_index.hpp"
#include "dwa3d/voxel_map.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwa3d {

enum class PathVariant { Naive, NotSizeAware, SizeAware };

inline const char* to_string(PathVariant v) {
  switch (v) {
    case PathVariant::Naive: return "naive";
    case PathVariant::NotSizeAware: return "rrt";
    case PathVariant::SizeAware: return "rrt-size";
  }
  return "?";
}

struct Path {
  std::vector<Vec3> waypoints;
  PathVariant variant = PathVariant::Naive;
  double cost = 0.0;
};

struct GlobalPlannerConfig {
  double k_length = 1.0;
  double k_height = 0.5;
  double safety_distance = 0.5;  // 0 selects the line-of-sight check
  int max_iterations = 5000;
  double steer_step = 0.5;
  double goal_bias = 0.1;
  double rewire_radius = 1.5;
  std::uint64_t rng_seed = 1;
  ObstaclePolicy policy = ObstaclePolicy::OccupiedOrUnknown;
  /// Sampling box; the map bounds when absent.
  std::optional<std::pair<Vec3, Vec3>> bounds;

  void validate() const {
    if (!(safety_distance >= 0.0)) throw std::invalid_argument("safety_distance must be >= 0");
    if (!(goal_bias >= 0.0 && goal_bias <= 1.0)) throw std::invalid_argument("goal_bias must be in [0, 1]");
    if (!(steer_step > 0.0)) throw std::invalid_argument("steer_step must be > 0");
    if (!(rewire_radius > 0.0)) throw std::invalid_argument("rewire_radius must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  }
};

/// Cost of the edge a -> b: its length plus the height error of a against the goal.
/// Summing edges along a path gives path_cost exactly.
inline double edge_cost(const Vec3& a, const Vec3& b, double goal_z, const GlobalPlannerConfig& c) {
  return c.k_length * (b - a).norm() + c.k_height * std::abs(goal_z - a.z());
}

/// K_length times the path length plus K_height times the height errors of every
/// waypoint but the last against the last.
inline double path_cost(const std::vector<Vec3>& w, const GlobalPlannerConfig& c) {
  if (w.size() < 2) throw std::invalid_argument("a path needs at least two waypoints");
  double cost = 0.0;
  const double zg = w.back().z();
  for (std::size_t i = 0; i + 1 < w.size(); ++i) cost += edge_cost(w[i], w[i + 1], zg, c);
  return cost;
}

inline Path plan_naive(const Vec3& start, const Vec3& goal, const GlobalPlannerConfig& c = {}) {
  if (start == goal) throw std::invalid_argument("degenerate request: start equals goal");
  Path p{{start, goal}, PathVariant::Naive, 0.0};
  p.cost = path_cost(p.waypoints, c);
  return p;
}

/// Line of sight for safety 0, otherwise no obstacle voxel center inside the capsule of
/// radius `safety` around [a, b].
inline bool segment_clear(const VoxelMap& map, const Vec3& a, const Vec3& b, double safety,
                          ObstaclePolicy policy = ObstaclePolicy::OccupiedOrUnknown) {
  const Vec3 ab = b - a;
  const double len = ab.norm();
  if (safety <= 0.0) {
    if (len == 0.0) return !is_obstacle(map.state_at_point(a), policy) || !map.contains(a);
    return map.raycast(a, ab / len, len, policy).hit == HitKind::Miss;
  }
  bool clear = true;
  map.for_each_index_in_box(0.5 * (a + b), 0.5 * len + safety, [&](const GridIndex& i) {
    if (clear && is_obstacle(map.state(i), policy) && point_segment_distance(map.center(i), a, b) <= safety)
      clear = false;
  });
  return clear;
}

/// Re-checks every consecutive pair of a path.
inline bool path_clear(const VoxelMap& map, const Path& p, double safety,
                       ObstaclePolicy policy = ObstaclePolicy::OccupiedOrUnknown) {
  for (std::size_t i = 0; i + 1 < p.waypoints.size(); ++i)
    if (!segment_clear(map, p.waypoints[i], p.waypoints[i + 1], safety, policy)) return false;
  return true;
}

struct RrtResult {
  std::optional<Path> path;
  int iterations = 0;
  std::size_t tree_size = 0;
  /// Best start-to-goal cost after each iteration (infinity until the goal is reached).
  std::vector<double> best_cost_history;
  std::string failure;  // set when no path was found
};

namespace detail {

// Segment test shared by the RRT* loop and shortcutting, served from an obstacle index.
class ClearanceChecker {
 public:
  ClearanceChecker(const VoxelMap& map, const GlobalPlannerConfig& c)
      : map_(map), safety_(c.safety_distance), policy_(c.policy),
        index_(map, c.policy, map.origin(), map.upper()) {}

  bool segment(const Vec3& a, const Vec3& b) const {
    if (safety_ <= 0.0) return segment_clear(map_, a, b, 0.0, policy_);
    return !index_.any_near_segment(a, b, safety_);
  }
  bool point(const Vec3& p) const {
    if (safety_ <= 0.0) return segment_clear(map_, p, p, 0.0, policy_);
    return !index_.any_within(p, safety_);
  }

 private:
  const VoxelMap& map_;
  double safety_;
  ObstaclePolicy policy_;
  ObstacleIndex index_;
};

}  // namespace detail

/// Removes interior waypoints whose neighbors see each other, scanning front to back.
template <class Clear>
std::vector<Vec3> shortcut(std::vector<Vec3> w, Clear&& clear) {
  std::size_t i = 1;
  while (i + 1 < w.size()) {
    if (clear(w[i - 1], w[i + 1]))
      w.erase(w.begin() + static_cast<std::ptrdiff_t>(i));
    else
      ++i;
  }
  return w;
}

inline RrtResult plan_rrt_star(const VoxelMap& map, const Vec3& start, const Vec3& goal,
                               const GlobalPlannerConfig& c) {
  c.validate();
  if (start == goal) throw std::invalid_argument("degenerate request: start equals goal");
  const detail::ClearanceChecker clear(map, c);
  if (!clear.point(start)) throw std::invalid_argument("start is not clear at the safety distance");
  if (!clear.point(goal)) throw std::invalid_argument("goal is not clear at the safety distance");

  const Vec3 lo = c.bounds ? c.bounds->first : map.origin();
  const Vec3 hi = c.bounds ? c.bounds->second : map.upper();
  const PathVariant variant = c.safety_distance > 0.0 ? PathVariant::SizeAware : PathVariant::NotSizeAware;
  const double zg = goal.z();
  constexpr double kInf = std::numeric_limits<double>::infinity();

  struct Node {
    Vec3 p;
    int parent;
    double cost;
    std::vector<int> children;
  };
  std::vector<Node> tree;
  tree.push_back({start, -1, 0.0, {}});
  std::vector<int> goal_parents;  // nodes with a clear edge to the goal

  std::mt19937_64 rng(c.rng_seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto propagate = [&](int root) {
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int n = stack.back();
      stack.pop_back();
      for (int ch : tree[n].children) {
        tree[ch].cost = tree[n].cost + edge_cost(tree[n].p, tree[ch].p, zg, c);
        stack.push_back(ch);
      }
    }
  };
  auto best_goal = [&](int& parent) {
    double best = kInf;
    parent = -1;
    for (int n : goal_parents) {
      const double v = tree[n].p == goal ? tree[n].cost : tree[n].cost + edge_cost(tree[n].p, goal, zg, c);
      if (v < best) {
        best = v;
        parent = n;
      }
    }
    return best;
  };

  RrtResult out;
  out.best_cost_history.reserve(static_cast<std::size_t>(c.max_iterations));
  for (int it = 0; it < c.max_iterations; ++it) {
    Vec3 sample = goal;
    if (unit(rng) >= c.goal_bias) {
      for (int a = 0; a < 3; ++a) sample[a] = lo[a] + (hi[a] - lo[a]) * unit(rng);
    }
    int nearest = 0;
    double best_d2 = kInf;
    for (int n = 0; n < static_cast<int>(tree.size()); ++n) {
      const double d2 = (tree[n].p - sample).squaredNorm();
      if (d2 < best_d2) {
        best_d2 = d2;
        nearest = n;
      }
    }
    const Vec3 from = tree[nearest].p;
    const double d = std::sqrt(best_d2);
    if (d == 0.0) {
      int unused;
      out.best_cost_history.push_back(best_goal(unused));
      continue;
    }
    const Vec3 q = d <= c.steer_step ? sample : Vec3(from + (sample - from) * (c.steer_step / d));

    if (clear.segment(from, q)) {
      std::vector<int> near;
      const double r2 = c.rewire_radius * c.rewire_radius;
      for (int n = 0; n < static_cast<int>(tree.size()); ++n)
        if ((tree[n].p - q).squaredNorm() <= r2) near.push_back(n);

      int parent = nearest;
      double cost = tree[nearest].cost + edge_cost(from, q, zg, c);
      for (int n : near) {
        if (n == nearest) continue;
        const double v = tree[n].cost + edge_cost(tree[n].p, q, zg, c);
        if (v < cost && tree[n].p != q && clear.segment(tree[n].p, q)) {
          cost = v;
          parent = n;
        }
      }
      const int id = static_cast<int>(tree.size());
      tree.push_back({q, parent, cost, {}});
      tree[parent].children.push_back(id);

      for (int n : near) {
        if (n == parent) continue;
        const double v = cost + edge_cost(q, tree[n].p, zg, c);
        if (v < tree[n].cost && tree[n].p != q && clear.segment(q, tree[n].p)) {
          auto& siblings = tree[tree[n].parent].children;
          siblings.erase(std::find(siblings.begin(), siblings.end(), n));
          tree[n].parent = id;
          tree[n].cost = v;
          tree[id].children.push_back(n);
          propagate(n);
        }
      }
      if (q == goal || ((goal - q).norm() <= c.steer_step && clear.segment(q, goal)))
        goal_parents.push_back(id);
    }
    int unused;
    out.best_cost_history.push_back(best_goal(unused));
  }
  out.iterations = c.max_iterations;
  out.tree_size = tree.size();

  int last = -1;
  if (std::isinf(best_goal(last))) {
    out.failure = "no path found after " + std::to_string(c.max_iterations) + " iterations";
    return out;
  }
  std::vector<Vec3> w;
  if (tree[last].p != goal) w.push_back(goal);
  for (int n = last; n >= 0; n = tree[n].parent) w.push_back(tree[n].p);
  std::reverse(w.begin(), w.end());
  w = shortcut(std::move(w), [&](const Vec3& a, const Vec3& b) { return clear.segment(a, b); });
  Path p{std::move(w), variant, 0.0};
  p.cost = path_cost(p.waypoints, c);
  out.path = std::move(p);
  return out;
}

}  // namespace dwa3d
