#pragma once

// DWA-3D local planner: dynamic-window search over (vx, vz, wz), admissibility by
// braking distance, and the heading / distance / velocity objective.

#include "dwa3d/config.hpp"
#include "dwa3d/obstacle_index.hpp"
#include "dwa3d/voxel_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace dwa3d {

/// Pose in the world frame plus the current commanded velocities (dronecentric).
struct DroneState {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;  // (-pi, pi]
  double vx = 0.0, vz = 0.0, wz = 0.0;

  Vec3 position() const { return {x, y, z}; }
};

struct VelocityCommand {
  double vx = 0.0;
  double vz = 0.0;
  double wz = 0.0;
  friend bool operator==(const VelocityCommand&, const VelocityCommand&) = default;
};

struct Pose {
  double x = 0.0, y = 0.0, z = 0.0;
  double yaw = 0.0;
  Vec3 position() const { return {x, y, z}; }
};

struct SearchSpace {
  std::vector<double> vx_values, vz_values, wz_values;
  std::vector<VelocityCommand> candidates;  // vx-major, then vz, then wz
  VelocitySteps steps;
};

struct CandidateScore {
  VelocityCommand command;
  Pose predicted;
  double head_psi = 0.0;
  double head_z = 0.0;
  double dist = 0.0;
  double vel = 0.0;
  double g = 0.0;
  bool admissible = false;
};

struct PlanResult {
  VelocityCommand command;
  bool no_admissible = false;
  std::size_t candidate_count = 0;
  std::size_t admissible_count = 0;
  std::vector<CandidateScore> table;  // empty when the caller does not keep it
};

/// Uniform-motion prediction over dt. The translation uses the new yaw.
inline Pose predict_pose(const DroneState& s, const VelocityCommand& v, double dt) {
  Pose p;
  p.yaw = s.yaw + v.wz * dt;
  p.x = s.x + v.vx * dt * std::cos(p.yaw);
  p.y = s.y + v.vx * dt * std::sin(p.yaw);
  p.z = s.z + v.vz * dt;
  return p;
}

/// Samples [lo, hi] at the lattice points k*step strictly inside the interval plus both
/// endpoints. A degenerate interval yields a single value.
inline std::vector<double> axis_samples(double lo, double hi, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("discretization step must be > 0");
  std::vector<double> out;
  out.push_back(lo);
  if (hi - lo <= 0.0) return out;
  const double tol = 1e-9 * step;
  const auto k0 = static_cast<long long>(std::floor(lo / step)) + 1;
  for (long long k = k0;; ++k) {
    const double v = static_cast<double>(k) * step;
    if (v >= hi - tol) break;
    if (v > lo + tol) out.push_back(v);
  }
  out.push_back(hi);
  return out;
}

namespace detail {
// Intersection of the limit interval with the reachable window; when they do not
// overlap the current value clipped to the limits is the only candidate.
inline std::pair<double, double> window(double current, double accel, double dt, double lo_lim,
                                        double hi_lim) {
  const double lo = std::max(lo_lim, current - accel * dt);
  const double hi = std::min(hi_lim, current + accel * dt);
  if (lo > hi) {
    const double c = std::clamp(current, lo_lim, hi_lim);
    return {c, c};
  }
  return {lo, hi};
}
}  // namespace detail

inline SearchSpace build_search_space(const DroneState& s, const Limits& limits,
                                      const VelocitySteps& steps, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("prediction horizon must be >= 0");
  SearchSpace space;
  space.steps = steps;
  auto [x0, x1] = detail::window(s.vx, limits.ax_max, dt, 0.0, limits.vx_max);
  auto [z0, z1] = detail::window(s.vz, limits.az_max, dt, -limits.vz_max, limits.vz_max);
  auto [w0, w1] = detail::window(s.wz, limits.alpha_z_max, dt, -limits.wz_max, limits.wz_max);
  space.vx_values = axis_samples(x0, x1, steps.vx);
  space.vz_values = axis_samples(z0, z1, steps.vz);
  space.wz_values = axis_samples(w0, w1, steps.wz);
  space.candidates.reserve(space.vx_values.size() * space.vz_values.size() *
                           space.wz_values.size());
  for (double vx : space.vx_values)
    for (double vz : space.vz_values)
      for (double wz : space.wz_values) space.candidates.push_back({vx, vz, wz});
  return space;
}

inline double speed_xz(const VelocityCommand& v) { return std::sqrt(v.vx * v.vx + v.vz * v.vz); }

/// Braking-distance test from the nearest obstacle distance (absent = nothing in range).
inline bool admissible_from_distance(const VelocityCommand& v, std::optional<double> nearest,
                                     const Limits& limits, double drone_radius) {
  if (!nearest) return true;
  const double d_col = std::max(0.0, *nearest - drone_radius);
  return speed_xz(v) <= std::sqrt(2.0 * d_col * limits.a_brake_max);
}

/// A velocity is admissible when the drone could still stop before the closest
/// obstacle around its predicted position. Unknown space counts as obstacle.
inline bool is_admissible(const VelocityCommand& v, const Pose& predicted, const VoxelMap& map,
                          const Limits& limits, double drone_radius, double search_radius) {
  if (v.vx == 0.0 && v.vz == 0.0) return true;
  return admissible_from_distance(
      v, map.nearest_obstacle_distance(predicted.position(), search_radius), limits, drone_radius);
}

/// Orientation alignment with the goal from the predicted pose, in [0, 1].
inline double head_psi(const Pose& p, const Vec3& goal) {
  const double dx = goal.x() - p.x;
  const double dy = goal.y() - p.y;
  if (dx == 0.0 && dy == 0.0) return 1.0;
  const double rel = std::atan2(dy, dx);
  return 1.0 - std::abs(wrap_angle(rel - p.yaw)) / kPi;
}

/// Height alignment, normalized by the largest height error in the batch.
inline std::vector<double> head_z_batch(std::span<const double> predicted_z, double goal_z) {
  if (predicted_z.empty()) throw std::invalid_argument("head_z_batch needs at least one pose");
  std::vector<double> dz(predicted_z.size());
  double max_dz = 0.0;
  for (std::size_t i = 0; i < dz.size(); ++i) {
    dz[i] = std::abs(goal_z - predicted_z[i]);
    max_dz = std::max(max_dz, dz[i]);
  }
  for (double& d : dz) d = (max_dz == 0.0) ? 1.0 : 1.0 - d / max_dz;
  return dz;
}

inline double ray_length(double psi_i, double theta_j, const BeamParams& b) {
  const double rho_psi = 1.0 - b.lambda_psi * std::abs(psi_i) / b.psi_max;
  const double rho_theta = 1.0 - b.lambda_theta * std::abs(theta_j) / b.theta_max;
  return b.r_search * rho_psi * rho_theta;
}

/// Angular samples from -max to +max. When 2*max is a whole number of steps the grid is
/// generated symmetrically (exact negation pairs, exact zero for an even count).
inline std::vector<double> beam_angles(double max_angle, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("beam angular step must be > 0");
  std::vector<double> out;
  if (max_angle <= 0.0) {
    out.push_back(0.0);
    return out;
  }
  const double span = 2.0 * max_angle / step;
  const double rounded = std::round(span);
  if (std::abs(span - rounded) < 1e-9) {
    const auto n = static_cast<long long>(rounded);
    const double unit = max_angle / static_cast<double>(n);
    for (long long k = 0; k <= n; ++k) out.push_back(static_cast<double>(2 * k - n) * unit);
    return out;
  }
  for (double a = -max_angle; a < max_angle - 1e-12; a += step) out.push_back(a);
  out.push_back(max_angle);
  return out;
}

inline double beam_pitch(const VelocityCommand& v) {
  if (v.vx == 0.0 && v.vz == 0.0) return 0.0;
  return std::atan2(v.vz, v.vx);
}

inline double distance_score(double dist_min, const BeamParams& b) {
  return std::max(0.0, (dist_min - b.drone_radius) / (b.r_search - b.drone_radius));
}

/// Casts the beam from the predicted pose. dist_min starts at r_search and is lowered by
/// every ray that reaches an occupied or unknown voxel within its length L_ij.
inline double distance_term(const Pose& p, const VelocityCommand& v, const VoxelMap& map,
                            const BeamParams& b) {
  const double pitch = beam_pitch(v);
  const Vec3 origin = p.position();
  double dist_min = b.r_search;
  for (double psi_i : beam_angles(b.psi_max, b.delta_psi)) {
    for (double theta_j : beam_angles(b.theta_max, b.delta_theta)) {
      const double len = std::min(ray_length(psi_i, theta_j, b), dist_min);
      if (!(len > 0.0)) continue;
      const double yaw = psi_i + p.yaw, el = theta_j + pitch;
      const Vec3 dir(std::cos(yaw) * std::cos(el), std::sin(yaw) * std::cos(el), std::sin(el));
      const RaycastResult hit = map.raycast(origin, dir, len);
      if (hit.hit != HitKind::Miss) dist_min = std::min(dist_min, hit.distance);
      if (dist_min <= b.drone_radius) return 0.0;
    }
  }
  return distance_score(dist_min, b);
}

inline double velocity_term(const VelocityCommand& v, double head_psi_score,
                            const ObjectiveWeights& w, const Limits& limits) {
  const bool reward = (w.k_z >= w.k_psi) || (head_psi_score > 0.5 && w.k_z < w.k_psi);
  return reward ? v.vx / limits.vx_max : 0.0;
}

inline double objective(const ObjectiveWeights& w, double hpsi, double hz, double dist, double vel) {
  return w.alpha * (w.k_psi * hpsi + w.k_z * hz) + w.beta * dist + w.gamma * vel;
}

/// Strict ranking used by the argmax: higher G, then larger vx, smaller |wz|, smaller
/// |vz|, smaller signed wz, smaller signed vz.
inline bool ranks_above(const CandidateScore& a, const CandidateScore& b) {
  if (a.g != b.g) return a.g > b.g;
  const VelocityCommand &u = a.command, &v = b.command;
  if (u.vx != v.vx) return u.vx > v.vx;
  if (std::abs(u.wz) != std::abs(v.wz)) return std::abs(u.wz) < std::abs(v.wz);
  if (std::abs(u.vz) != std::abs(v.vz)) return std::abs(u.vz) < std::abs(v.vz);
  if (u.wz != v.wz) return u.wz < v.wz;
  return u.vz < v.vz;
}

namespace detail {

// Per-plan cache for the distance term: beam angles, ray lengths, and an obstacle index
// covering every point a candidate can reach plus the beam radius.
class BeamEvaluator {
 public:
  BeamEvaluator(const VoxelMap& map, const BeamParams& beam, const ObstacleIndex& index)
      : map_(map), beam_(beam), index_(index),
        psi_(beam_angles(beam.psi_max, beam.delta_psi)),
        theta_(beam_angles(beam.theta_max, beam.delta_theta)) {
    lengths_.reserve(psi_.size() * theta_.size());
    for (double a : psi_)
      for (double t : theta_) lengths_.push_back(ray_length(a, t, beam));
    cos_yaw_.resize(psi_.size());
    sin_yaw_.resize(psi_.size());
    cos_el_.resize(theta_.size());
    sin_el_.resize(theta_.size());
    reach_ = beam.r_search + map.half_diagonal() + 1e-9;
  }

  /// Distance score of the beam from pose p. With a cutoff, gives up (returns empty)
  /// as soon as the score is certain to end below it.
  std::optional<double> evaluate(const Pose& p, const VelocityCommand& v,
                                 double cutoff = -std::numeric_limits<double>::infinity()) {
    const Vec3 origin = p.position();
    // A ray of length L can only enter cells whose centers lie within L plus half a voxel
    // diagonal. Gather those centers once; rays that provably miss all of them are skipped
    // without traversal.
    if (!index_.covers(origin, reach_)) return slow_evaluate(p, v);
    // Score falls below the cutoff once dist_min drops under this.
    const double abort_below = beam_.drone_radius + cutoff * (beam_.r_search - beam_.drone_radius);
    const double radius = beam_.drone_radius;
    const std::size_t n_theta = theta_.size(), n_rays = lengths_.size();
    set_directions(p, v);
    double dist_min = beam_.r_search;
    // The minimum does not depend on ray order, so the ray that ended the previous
    // evaluation is cast first, before the gather: neighbouring candidates are usually
    // stopped by the same ray.
    auto cast = [&](std::size_t k) {
      const std::size_t i = k / n_theta, j = k % n_theta;
      const double len = std::min(lengths_[k], dist_min);
      if (!(len > 0.0)) return false;
      const Vec3 dir(cos_yaw_[i] * cos_el_[j], sin_yaw_[i] * cos_el_[j], sin_el_[j]);
      const RaycastResult hit = map_.raycast(origin, dir, len);
      if (hit.hit != HitKind::Miss) dist_min = std::min(dist_min, hit.distance);
      if (dist_min <= radius || dist_min < abort_below) {
        killer_ = k;
        return true;
      }
      return false;
    };
    auto stopped = [&]() -> std::optional<double> {
      if (dist_min <= radius && !(cutoff > 0.0)) return 0.0;
      return std::nullopt;
    };
    if (cast(killer_)) return stopped();

    double near2 = std::numeric_limits<double>::infinity();
    Vec3 lo = Vec3::Constant(near2), hi = Vec3::Constant(-near2);
    index_.for_each_within(origin, reach_, [&](const Vec3& c) {
      near2 = std::min(near2, (c - origin).squaredNorm());
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    });
    if (std::isinf(near2)) return distance_score(dist_min, beam_);
    const double near = std::sqrt(near2);
    const double cell = 0.5 * map_.resolution() + 1e-9;
    lo.array() -= cell;
    hi.array() += cell;
    const double hd = map_.half_diagonal() + 1e-9;

    for (std::size_t k = 0; k < n_rays; ++k) {
      if (k == killer_) continue;
      const std::size_t i = k / n_theta, j = k % n_theta;
      const double len = std::min(lengths_[k], dist_min);
      if (!(len > 0.0) || len + hd < near) continue;
      const Vec3 dir(cos_yaw_[i] * cos_el_[j], sin_yaw_[i] * cos_el_[j], sin_el_[j]);
      const Vec3 end = origin + len * dir;
      if ((origin.cwiseMax(end).array() < lo.array()).any() || (origin.cwiseMin(end).array() > hi.array()).any())
        continue;
      if (cast(k)) return stopped();
    }
    return distance_score(dist_min, beam_);
  }

 private:
  void set_directions(const Pose& p, const VelocityCommand& v) {
    const double pitch = beam_pitch(v);
    for (std::size_t i = 0; i < psi_.size(); ++i) {
      const double yaw = psi_[i] + p.yaw;
      cos_yaw_[i] = std::cos(yaw);
      sin_yaw_[i] = std::sin(yaw);
    }
    for (std::size_t j = 0; j < theta_.size(); ++j) {
      const double el = theta_[j] + pitch;
      cos_el_[j] = std::cos(el);
      sin_el_[j] = std::sin(el);
    }
  }

  // Unindexed fallback: every ray is traversed.
  double slow_evaluate(const Pose& p, const VelocityCommand& v) {
    const Vec3 origin = p.position();
    set_directions(p, v);
    double dist_min = beam_.r_search;
    std::size_t k = 0;
    for (std::size_t i = 0; i < psi_.size(); ++i) {
      for (std::size_t j = 0; j < theta_.size(); ++j, ++k) {
        const double len = std::min(lengths_[k], dist_min);
        if (!(len > 0.0)) continue;
        const Vec3 dir(cos_yaw_[i] * cos_el_[j], sin_yaw_[i] * cos_el_[j], sin_el_[j]);
        const RaycastResult hit = map_.raycast(origin, dir, len);
        if (hit.hit != HitKind::Miss) dist_min = std::min(dist_min, hit.distance);
        if (dist_min <= beam_.drone_radius) return 0.0;
      }
    }
    return distance_score(dist_min, beam_);
  }

 private:
  const VoxelMap& map_;
  const BeamParams& beam_;
  const ObstacleIndex& index_;
  std::vector<double> psi_, theta_, lengths_;
  std::vector<double> cos_yaw_, sin_yaw_, cos_el_, sin_el_;
  double reach_ = 0.0;
  std::size_t killer_ = 0;
};

}  // namespace detail

/// One DWA-3D iteration: enumerate the dynamic window, drop inadmissible velocities,
/// score the rest with G and return the argmax. With no admissible velocity the result
/// is the stop command flagged `no_admissible`.
inline PlanResult plan(const DroneState& s, const Vec3& subgoal, const VoxelMap& map,
                       const PlannerConfig& cfg, bool keep_table = true) {
  if (!validate_weights(cfg.weights, cfg.limits, cfg.beam, cfg.dt).ok())
    throw std::invalid_argument("objective weights violate their constraints");
  if (!all_finite(subgoal)) throw std::invalid_argument("subgoal must be finite");

  const SearchSpace space = build_search_space(s, cfg.limits, cfg.steps, cfg.dt);
  const BeamParams& beam = cfg.beam;
  const double search_radius = cfg.admissibility_radius();

  double max_vx = 0.0, max_vz = 0.0;
  for (double v : space.vx_values) max_vx = std::max(max_vx, std::abs(v));
  for (double v : space.vz_values) max_vz = std::max(max_vz, std::abs(v));
  const double reach = std::max(search_radius, beam.r_search) + map.half_diagonal() +
                       map.resolution();
  const Vec3 here = s.position();
  const Vec3 span(max_vx * cfg.dt + reach, max_vx * cfg.dt + reach, max_vz * cfg.dt + reach);
  const ObstacleIndex index(map, ObstaclePolicy::OccupiedOrUnknown, here - span, here + span);
  detail::BeamEvaluator beam_eval(map, beam, index);

  std::vector<CandidateScore> table(space.candidates.size());
  std::vector<std::size_t> admissible;
  admissible.reserve(table.size());
  for (std::size_t c = 0; c < table.size(); ++c) {
    CandidateScore& row = table[c];
    row.command = space.candidates[c];
    row.predicted = predict_pose(s, row.command, cfg.dt);
    const VelocityCommand& v = row.command;
    if (v.vx == 0.0 && v.vz == 0.0) {
      row.admissible = true;
    } else {
      // Only obstacles closer than R + v^2/(2a) can reject v, so the exact nearest
      // search is limited to that radius (plus slack) when it is below the full one.
      const double v2 = v.vx * v.vx + v.vz * v.vz;
      const double needed = beam.drone_radius + v2 / (2.0 * cfg.limits.a_brake_max) + 1e-6;
      const double r = std::min(needed, search_radius);
      const auto nearest = index.nearest_within(row.predicted.position(), r);
      row.admissible = admissible_from_distance(v, nearest, cfg.limits, beam.drone_radius);
    }
    if (row.admissible) admissible.push_back(c);
  }

  PlanResult result;
  result.candidate_count = table.size();
  result.admissible_count = admissible.size();
  if (admissible.empty()) {
    result.no_admissible = true;
    result.command = {};
    if (keep_table) result.table = std::move(table);
    return result;
  }

  std::vector<double> zs;
  zs.reserve(admissible.size());
  for (std::size_t c : admissible) zs.push_back(table[c].predicted.z);
  const std::vector<double> hz = head_z_batch(zs, subgoal.z());

  for (std::size_t n = 0; n < admissible.size(); ++n) {
    CandidateScore& row = table[admissible[n]];
    row.head_psi = head_psi(row.predicted, subgoal);
    row.head_z = hz[n];
    row.vel = velocity_term(row.command, row.head_psi, cfg.weights, cfg.limits);
  }

  std::size_t best = admissible.front();
  if (keep_table) {
    for (std::size_t n = 0; n < admissible.size(); ++n) {
      CandidateScore& row = table[admissible[n]];
      row.dist = *beam_eval.evaluate(row.predicted, row.command);
      row.g = objective(cfg.weights, row.head_psi, row.head_z, row.dist, row.vel);
      if (n > 0 && ranks_above(row, table[best])) best = admissible[n];
    }
  } else {
    // Branch and bound: Dist <= 1 bounds G from above, so candidates are visited by
    // decreasing bound and the beam is abandoned once a candidate cannot reach the
    // incumbent. The slack keeps rounding from pruning a candidate that could tie.
    constexpr double kSlack = 1e-9;
    const auto& w = cfg.weights;
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(admissible.size());
    for (std::size_t c : admissible) {
      const CandidateScore& row = table[c];
      order.emplace_back(objective(w, row.head_psi, row.head_z, 1.0, row.vel), c);
    }
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    bool have_best = false;
    for (const auto& [bound, c] : order) {
      if (have_best && bound < table[best].g - kSlack) break;
      CandidateScore& row = table[c];
      double cutoff = -std::numeric_limits<double>::infinity();
      if (have_best && w.beta > 0.0) cutoff = (table[best].g - bound) / w.beta + 1.0 - kSlack;
      const std::optional<double> dist = beam_eval.evaluate(row.predicted, row.command, cutoff);
      if (!dist) continue;
      row.dist = *dist;
      row.g = objective(w, row.head_psi, row.head_z, row.dist, row.vel);
      if (!have_best || ranks_above(row, table[best])) {
        best = c;
        have_best = true;
      }
    }
  }
  result.command = table[best].command;
  if (keep_table) result.table = std::move(table);
  return result;
}

}  // namespace dwa3d
