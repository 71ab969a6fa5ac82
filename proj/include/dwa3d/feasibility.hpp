#pragma once

// Thrust / pitch relations of a multirotor in forward flight (no drag, zero roll and yaw).

#include "dwa3d/config.hpp"

#include <cmath>
#include <stdexcept>

namespace dwa3d {

struct AirframeParams {
  double mass = 3.65;  // kg
  int rotor_count = 6;
  double g = 9.81;
  double theta_max = deg2rad(25.0);
  double max_thrust_per_motor = 13.0;  // N

  void validate() const {
    if (!(mass > 0.0) || rotor_count <= 0 || !(g > 0.0) || !(theta_max > 0.0) ||
        !(max_thrust_per_motor > 0.0))
      throw std::domain_error("airframe parameters must all be positive");
  }
};

/// Per-motor thrust that holds altitude while pitched by theta.
inline double hover_thrust_per_motor(const AirframeParams& a, double theta) {
  a.validate();
  const double c = std::cos(theta);
  if (!(c > 0.0) || std::abs(theta) >= kPi / 2) throw std::domain_error("pitch must be below 90 degrees");
  return a.g * a.mass / (a.rotor_count * c);
}

/// Horizontal acceleration produced by `thrust` per motor at pitch theta.
inline double max_forward_accel(const AirframeParams& a, double theta, double thrust) {
  a.validate();
  return a.rotor_count * thrust * std::sin(theta) / a.mass;
}

/// Pitch whose thrust direction yields the acceleration pair (ax, az).
inline double pitch_for_accel(double ax, double az, double g) {
  if (!(az + g > 0.0)) throw std::domain_error("az + g must be positive");
  return std::atan(ax / (az + g));
}

/// Per-motor thrust balancing gravity plus a vertical acceleration az at pitch theta.
inline double required_thrust_per_motor(const AirframeParams& a, double theta, double az) {
  a.validate();
  const double c = std::cos(theta);
  if (!(c > 0.0)) throw std::domain_error("pitch must be below 90 degrees");
  return a.mass * (a.g + az) / (a.rotor_count * c);
}

/// Checks that the planner's acceleration limits are within what the airframe can do.
inline ValidationReport check_limits_feasible(const Limits& l, const AirframeParams& a) {
  a.validate();
  ValidationReport r;
  const double hover = hover_thrust_per_motor(a, a.theta_max);
  const double reach = max_forward_accel(a, a.theta_max, hover);
  r.checks.push_back({"forward_accel", "ax_max <= forward accel at theta_max with hover thrust",
                      l.ax_max <= reach, reach - l.ax_max, false});
  const double theta = pitch_for_accel(l.ax_max, l.az_max, a.g);
  r.checks.push_back({"pitch_limit", "pitch for (ax_max, az_max) <= theta_max", theta <= a.theta_max,
                      a.theta_max - theta, false});
  const double need = required_thrust_per_motor(a, theta, l.az_max);
  r.checks.push_back({"motor_thrust", "thrust for (ax_max, az_max) <= max thrust per motor",
                      need <= a.max_thrust_per_motor, a.max_thrust_per_motor - need, false});
  r.checks.push_back({"hover_thrust", "hover thrust at theta_max <= max thrust per motor",
                      hover <= a.max_thrust_per_motor, a.max_thrust_per_motor - hover, false});
  return r;
}

}  // namespace dwa3d
