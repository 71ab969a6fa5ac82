#pragma once

// Planner parameters and the analytic weight constraints.

#include "dwa3d/math.hpp"

#include <algorithm>
#include <ostream>
#include <string>
#include <vector>

namespace dwa3d {

/// Velocity and acceleration limits of the airframe (dronecentric X forward, Z up).
struct Limits {
  double vx_max = 0.3;            // m/s
  double vz_max = 0.3;            // m/s
  double wz_max = deg2rad(45.0);  // rad/s
  double ax_max = 1.0;            // m/s^2
  double az_max = 1.0;            // m/s^2
  double alpha_z_max = deg2rad(100.0);  // rad/s^2
  double a_brake_max = 1.0;       // m/s^2, deceleration used by the admissibility test
  friend bool operator==(const Limits&, const Limits&) = default;
};

struct ObjectiveWeights {
  double alpha = 0.3;  // heading
  double beta = 0.6;   // distance
  double gamma = 0.1;  // velocity
  double k_psi = 0.2;
  double k_z = 0.8;
  friend bool operator==(const ObjectiveWeights&, const ObjectiveWeights&) = default;
};

/// Lateral-avoidance preference: keep height, give up orientation.
inline ObjectiveWeights lateral_avoidance(ObjectiveWeights w = {}) {
  w.k_psi = 0.2;
  w.k_z = 0.8;
  return w;
}
/// Vertical-avoidance preference: keep orientation, give up height.
inline ObjectiveWeights vertical_avoidance(ObjectiveWeights w = {}) {
  w.k_psi = 0.8;
  w.k_z = 0.2;
  return w;
}

/// Geometry of the ray beam used by the distance term, plus the drone footprint.
struct BeamParams {
  double r_search = 1.0;
  double lambda_psi = 0.5;
  double lambda_theta = 0.75;
  double psi_max = deg2rad(90.0);
  double theta_max = deg2rad(90.0);
  double delta_psi = deg2rad(10.0);
  double delta_theta = deg2rad(10.0);
  double drone_radius = 0.4;
  double drone_height = 0.3;
};

struct VelocitySteps {
  double vx = 0.05;
  double vz = 0.05;
  double wz = deg2rad(2.5);
};

struct PlannerConfig {
  Limits limits;
  ObjectiveWeights weights;
  BeamParams beam;
  VelocitySteps steps;
  double dt = 1.0;  // prediction horizon, 10 control periods
  /// Radius of the nearest-obstacle search used by the admissibility test.
  double admissibility_radius() const { return beam.r_search; }
};

struct ConstraintCheck {
  std::string name;
  std::string expression;
  bool pass = false;
  double margin = 0.0;  // positive when satisfied
  bool advisory = false;
};

struct ValidationReport {
  std::vector<ConstraintCheck> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(),
                       [](const ConstraintCheck& c) { return c.pass || c.advisory; });
  }
  const ConstraintCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.pass) out.push_back(c.name);
    return out;
  }
};

inline std::ostream& operator<<(std::ostream& os, const ValidationReport& r) {
  for (const auto& c : r.checks) {
    os << (c.pass ? "PASS " : (c.advisory ? "WARN " : "FAIL ")) << c.name << "  " << c.expression
       << "  margin=" << c.margin << '\n';
  }
  return os;
}

/// Checks the objective weights against the normalization and tuning constraints:
/// sums to one, ranges, beta > alpha, beta*lambda_psi > alpha*wz_max*dt/pi,
/// beta > gamma, alpha*max(Kz, Kpsi) > gamma.
inline ValidationReport validate_weights(const ObjectiveWeights& w, const Limits& limits,
                                         const BeamParams& beam, double dt) {
  constexpr double kSumTol = 1e-9;
  ValidationReport r;
  auto add = [&](std::string name, std::string expr, double margin, bool pass) {
    r.checks.push_back({std::move(name), std::move(expr), pass, margin, false});
  };
  const double sum_abg = w.alpha + w.beta + w.gamma;
  add("sum_abg", "alpha + beta + gamma = 1", kSumTol - std::abs(sum_abg - 1.0),
      std::abs(sum_abg - 1.0) <= kSumTol);
  const double sum_k = w.k_psi + w.k_z;
  add("sum_k", "K_psi + K_z = 1", kSumTol - std::abs(sum_k - 1.0), std::abs(sum_k - 1.0) <= kSumTol);

  double range_margin = 1.0;
  for (double v : {w.alpha, w.beta, w.gamma, w.k_psi, w.k_z})
    range_margin = std::min({range_margin, v, 1.0 - v});
  add("ranges", "alpha, beta, gamma, K_psi, K_z in [0, 1]", range_margin, range_margin >= 0.0);

  add("beta_gt_alpha", "beta > alpha", w.beta - w.alpha, w.beta > w.alpha);
  const double turn = w.alpha * (limits.wz_max * dt / kPi);
  add("beta_lambda_gt_alpha_turn", "beta * lambda_psi > alpha * wz_max * dt / pi",
      w.beta * beam.lambda_psi - turn, w.beta * beam.lambda_psi > turn);
  add("beta_gt_gamma", "beta > gamma", w.beta - w.gamma, w.beta > w.gamma);
  const double heading = w.alpha * std::max(w.k_z, w.k_psi);
  add("alpha_k_gt_gamma", "alpha * max(K_z, K_psi) > gamma", heading - w.gamma, heading > w.gamma);
  return r;
}

/// Beam geometry restrictions. The two footprint restrictions are advisory: the
/// recommended r_search = 1 m violates the vertical one (0.25 m < 0.3 m).
inline ValidationReport validate_beam(const BeamParams& b) {
  ValidationReport r;
  auto add = [&](std::string name, std::string expr, double margin, bool pass, bool advisory) {
    r.checks.push_back({std::move(name), std::move(expr), pass, margin, advisory});
  };
  add("r_search_gt_radius", "r_search > R_drone", b.r_search - b.drone_radius,
      b.r_search > b.drone_radius, false);
  add("steps_positive", "delta_psi > 0 and delta_theta > 0", std::min(b.delta_psi, b.delta_theta),
      b.delta_psi > 0.0 && b.delta_theta > 0.0, false);
  const double lam = std::min({b.lambda_psi, b.lambda_theta, 1.0 - b.lambda_psi, 1.0 - b.lambda_theta});
  add("lambda_ranges", "lambda_psi, lambda_theta in [0, 1]", lam, lam >= 0.0, false);
  const double lat = b.r_search * (1.0 - b.lambda_psi) - b.drone_radius;
  add("lateral_reach", "r_search * (1 - lambda_psi) > R_drone", lat, lat > 0.0, true);
  const double ver = b.r_search * (1.0 - b.lambda_theta) - b.drone_height;
  add("vertical_reach", "r_search * (1 - lambda_theta) > H_drone", ver, ver > 0.0, true);
  return r;
}

inline ValidationReport validate_limits(const Limits& l) {
  ValidationReport r;
  double m = std::min({l.vx_max, l.vz_max, l.wz_max, l.ax_max, l.az_max, l.alpha_z_max, l.a_brake_max});
  r.checks.push_back({"limits_positive", "all velocity and acceleration limits > 0", m > 0.0, m, false});
  return r;
}

}  // namespace dwa3d
