#pragma once

// Ground-truth scene geometry: boxes, vertical cylinders and rings (a loop of boxes),
// optionally moving at constant velocity.

#include "dwa3d/math.hpp"

#include <Eigen/Geometry>

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwa3d {

enum class PrimitiveKind { Box, Cylinder, Ring };

inline const char* to_string(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Ring: return "ring";
  }
  return "?";
}

/// Constant-velocity motion that starts at `start_time` and, when `travel_distance` is
/// set, stops after covering that distance.
struct Motion {
  Vec3 velocity = Vec3::Zero();
  double start_time = 0.0;
  std::optional<double> travel_distance;

  Vec3 offset(double t) const {
    double dt = std::max(0.0, t - start_time);
    const double speed = velocity.norm();
    if (travel_distance && speed > 0.0) dt = std::min(dt, *travel_distance / speed);
    return velocity * dt;
  }
  friend bool operator==(const Motion&, const Motion&) = default;
};

/// One obstacle. `center` is the geometric center. Dimensions:
///   box      size = (x extent, y extent, z extent) before yaw
///   cylinder size = (radius, height, unused), vertical axis
///   ring     size = (major radius, tube radius, unused); the ring stands vertically and
///            its axis points along `yaw`, so it is flown through along that heading.
struct ScenePrimitive {
  PrimitiveKind kind = PrimitiveKind::Box;
  Vec3 center = Vec3::Zero();
  double yaw = 0.0;
  Vec3 size = Vec3::Ones();
  std::optional<Motion> motion;

  void validate() const {
    const int n = kind == PrimitiveKind::Box ? 3 : 2;
    for (int a = 0; a < n; ++a)
      if (!(size[a] > 0.0) || !std::isfinite(size[a]))
        throw std::invalid_argument(std::string(to_string(kind)) + " dimensions must be positive");
    if (kind == PrimitiveKind::Ring && !(size[1] < size[0]))
      throw std::invalid_argument("ring tube radius must be below the major radius");
    if (!all_finite(center) || !std::isfinite(yaw)) throw std::invalid_argument("primitive pose must be finite");
  }
  friend bool operator==(const ScenePrimitive&, const ScenePrimitive&) = default;
};

/// Oriented box with yaw-only or general rotation.
struct OrientedBox {
  Vec3 center;
  Eigen::Matrix3d rot;  // columns are the box axes in world coordinates
  Vec3 half;

  /// Entry distance of the ray o + t d, t in [0, max_len], or empty.
  std::optional<double> intersect(const Vec3& o, const Vec3& d, double max_len) const {
    const Vec3 lo = rot.transpose() * (o - center);
    const Vec3 ld = rot.transpose() * d;
    double t0 = 0.0, t1 = max_len;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(ld[a]) < 1e-15) {
        if (std::abs(lo[a]) > half[a]) return std::nullopt;
        continue;
      }
      double ta = (-half[a] - lo[a]) / ld[a], tb = (half[a] - lo[a]) / ld[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return std::nullopt;
    }
    return t0;
  }
  /// Distance to the surface; negative inside (minus the penetration depth).
  double signed_distance(const Vec3& p) const {
    const Vec3 q = (rot.transpose() * (p - center)).cwiseAbs() - half;
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside;
  }
};

inline Eigen::Matrix3d yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

/// Number of boxes approximating a ring.
inline constexpr int kRingSegments = 16;

/// Boxes approximating a ring: one per segment, centered on the major circle, tangent
/// length chosen so neighbors meet on the circle, cross-section 2r x 2r.
inline std::vector<OrientedBox> ring_boxes(const Vec3& center, double yaw, double major, double tube) {
  std::vector<OrientedBox> out;
  const Eigen::Matrix3d frame = yaw_rotation(yaw);  // x: ring axis, y/z: ring plane
  const double seg = 2.0 * major * std::tan(kPi / kRingSegments);
  for (int k = 0; k < kRingSegments; ++k) {
    const double phi = 2.0 * kPi * k / kRingSegments;
    const Vec3 radial_local(0.0, std::cos(phi), std::sin(phi));
    const Vec3 tangent_local(0.0, -std::sin(phi), std::cos(phi));
    Eigen::Matrix3d local;
    local.col(0) = tangent_local;
    local.col(1) = radial_local;
    local.col(2) = Vec3::UnitX();
    OrientedBox b;
    b.center = center + frame * (major * radial_local);
    b.rot = frame * local;
    b.half = Vec3(0.5 * seg, tube, tube);
    out.push_back(b);
  }
  return out;
}

/// Ray entry distance against a vertical cylinder (side and caps).
inline std::optional<double> intersect_cylinder(const Vec3& c, double radius, double height,
                                                const Vec3& o, const Vec3& d, double max_len) {
  const double hz = 0.5 * height;
  double t0 = 0.0, t1 = max_len;
  // Vertical slab.
  if (std::abs(d.z()) < 1e-15) {
    if (std::abs(o.z() - c.z()) > hz) return std::nullopt;
  } else {
    double ta = (c.z() - hz - o.z()) / d.z(), tb = (c.z() + hz - o.z()) / d.z();
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  // Infinite circular prism.
  const double ox = o.x() - c.x(), oy = o.y() - c.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  const double b = ox * d.x() + oy * d.y();
  const double cc = ox * ox + oy * oy - radius * radius;
  if (a < 1e-15) {
    if (cc > 0.0) return std::nullopt;
  } else {
    const double disc = b * b - a * cc;
    if (disc < 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    const double ta = (-b - s) / a, tb = (-b + s) / a;
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

inline double cylinder_signed_distance(const Vec3& c, double radius, double height, const Vec3& p) {
  const double dr = std::hypot(p.x() - c.x(), p.y() - c.y()) - radius;
  const double dz = std::abs(p.z() - c.z()) - 0.5 * height;
  const double outside = std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
  return outside + std::min(std::max(dr, dz), 0.0);
}

/// Collection of primitives evaluated at a simulation time.
class Scene {
 public:
  Scene() = default;
  explicit Scene(std::vector<ScenePrimitive> prims) : prims_(std::move(prims)) {
    for (const auto& p : prims_) {
      p.validate();
      if (p.kind == PrimitiveKind::Ring)
        rings_.push_back(ring_boxes(Vec3::Zero(), p.yaw, p.size[0], p.size[1]));
      else
        rings_.emplace_back();
    }
  }

  const std::vector<ScenePrimitive>& primitives() const { return prims_; }
  bool has_motion() const {
    for (const auto& p : prims_)
      if (p.motion && p.motion->velocity.squaredNorm() > 0.0) return true;
    return false;
  }

  Vec3 center_at(std::size_t i, double t) const {
    const auto& p = prims_[i];
    return p.motion ? Vec3(p.center + p.motion->offset(t)) : p.center;
  }

  /// Nearest surface hit of the ray within max_len at time t.
  std::optional<double> raycast(const Vec3& o, const Vec3& d, double max_len, double t) const {
    std::optional<double> best;
    for (std::size_t i = 0; i < prims_.size(); ++i) {
      const auto hit = intersect(i, o, d, best ? *best : max_len, t);
      if (hit && (!best || *hit < *best)) best = hit;
    }
    return best;
  }

  std::optional<double> intersect(std::size_t i, const Vec3& o, const Vec3& d, double max_len, double t) const {
    const auto& p = prims_[i];
    const Vec3 c = center_at(i, t);
    switch (p.kind) {
      case PrimitiveKind::Box:
        return OrientedBox{c, yaw_rotation(p.yaw), 0.5 * p.size}.intersect(o, d, max_len);
      case PrimitiveKind::Cylinder:
        return intersect_cylinder(c, p.size[0], p.size[1], o, d, max_len);
      case PrimitiveKind::Ring: {
        // Cheap bounding-sphere reject before the 16 boxes.
        const double reach = p.size[0] + 2.0 * p.size[1] + p.size[0] * std::tan(kPi / kRingSegments);
        const Vec3 oc = o - c;
        const double t_close = std::clamp(-oc.dot(d), 0.0, max_len);
        if ((oc + t_close * d).norm() > reach) return std::nullopt;
        std::optional<double> best;
        for (const auto& b : rings_[i]) {
          OrientedBox moved = b;
          moved.center += c;
          const auto h = moved.intersect(o, d, best ? *best : max_len);
          if (h && (!best || *h < *best)) best = h;
        }
        return best;
      }
    }
    return std::nullopt;
  }

  /// Signed distance from p to primitive i's surface at time t.
  double signed_distance(std::size_t i, const Vec3& p, double t) const {
    const auto& prim = prims_[i];
    const Vec3 c = center_at(i, t);
    switch (prim.kind) {
      case PrimitiveKind::Box:
        return OrientedBox{c, yaw_rotation(prim.yaw), 0.5 * prim.size}.signed_distance(p);
      case PrimitiveKind::Cylinder:
        return cylinder_signed_distance(c, prim.size[0], prim.size[1], p);
      case PrimitiveKind::Ring: {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& b : rings_[i]) {
          OrientedBox moved = b;
          moved.center += c;
          best = std::min(best, moved.signed_distance(p));
        }
        return best;
      }
    }
    return std::numeric_limits<double>::infinity();
  }

  /// Distance from p to the closest surface at time t (negative inside an obstacle).
  double clearance(const Vec3& p, double t) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prims_.size(); ++i) best = std::min(best, signed_distance(i, p, t));
    return best;
  }

  /// Clearance ignoring static primitives (used for moving-obstacle metrics).
  double moving_clearance(const Vec3& p, double t) const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prims_.size(); ++i)
      if (prims_[i].motion) best = std::min(best, signed_distance(i, p, t));
    return best;
  }

 private:
  std::vector<ScenePrimitive> prims_;
  std::vector<std::vector<OrientedBox>> rings_;  // ring boxes relative to the ring center
};

}  // namespace dwa3d
