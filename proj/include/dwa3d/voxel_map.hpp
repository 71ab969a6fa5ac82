#pragma once

// Dense log-odds occupancy grid with grid-traversal raycasting.

#include "dwa3d/math.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwa3d {

enum class Occupancy : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

/// Which cell classes block rays and count in distance queries.
enum class ObstaclePolicy : std::uint8_t { OccupiedOrUnknown, OccupiedOnly };

enum class HitKind : std::uint8_t { Miss, Occupied, Unknown };

inline bool is_obstacle(Occupancy s, ObstaclePolicy policy) {
  return s == Occupancy::Occupied ||
         (s == Occupancy::Unknown && policy == ObstaclePolicy::OccupiedOrUnknown);
}

struct LogOddsParams {
  float hit = 0.85f;
  float miss = -0.40f;
  float clamp_min = -2.0f;
  float clamp_max = 3.5f;
  float occupied_threshold = 0.0f;
  float free_threshold = -0.4f;
};

struct GridIndex {
  int x = 0;
  int y = 0;
  int z = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

struct RaycastResult {
  HitKind hit = HitKind::Miss;
  double distance = 0.0;  // entry distance of the hit voxel, or the cast length on Miss
  std::optional<GridIndex> voxel;
};

struct ScanStats {
  std::size_t hits = 0;
  std::size_t free_rays = 0;
  std::size_t skipped = 0;
  std::size_t voxels_updated = 0;
};

class VoxelMap {
 public:
  VoxelMap(const Vec3& origin, double resolution, std::array<int, 3> dims,
           LogOddsParams params = {})
      : origin_(origin), res_(resolution), dims_(dims), params_(params) {
    if (!(resolution > 0.0)) throw std::invalid_argument("voxel resolution must be > 0");
    for (int d : dims_)
      if (d <= 0) throw std::invalid_argument("voxel map extents must be positive");
    if (!(params_.clamp_min < params_.clamp_max) ||
        !(params_.free_threshold < params_.occupied_threshold) || !(params_.hit > 0.0f) ||
        !(params_.miss < 0.0f))
      throw std::invalid_argument("inconsistent log-odds parameters");
    const std::size_t n = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    log_odds_.assign(n, std::numeric_limits<float>::quiet_NaN());
    state_.assign(n, Occupancy::Unknown);
  }

  /// Smallest map with the given resolution whose bounds contain [lo, hi].
  static VoxelMap covering(const Vec3& lo, const Vec3& hi, double resolution,
                           LogOddsParams params = {}) {
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a)
      dims[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / resolution - 1e-9)));
    return VoxelMap(lo, resolution, dims, params);
  }

  const Vec3& origin() const { return origin_; }
  double resolution() const { return res_; }
  const std::array<int, 3>& dims() const { return dims_; }
  const LogOddsParams& params() const { return params_; }
  std::size_t size() const { return state_.size(); }
  Vec3 upper() const {
    return origin_ + Vec3(dims_[0] * res_, dims_[1] * res_, dims_[2] * res_);
  }
  double half_diagonal() const { return 0.5 * std::sqrt(3.0) * res_; }
  /// Running total of scan points rejected for lying outside the map.
  std::size_t skipped_points() const { return skipped_total_; }

  bool in_grid(const GridIndex& i) const {
    return i.x >= 0 && i.y >= 0 && i.z >= 0 && i.x < dims_[0] && i.y < dims_[1] &&
           i.z < dims_[2];
  }
  bool contains(const Vec3& p) const {
    for (int a = 0; a < 3; ++a)
      if (!(p[a] >= origin_[a] && p[a] < origin_[a] + dims_[a] * res_)) return false;
    return true;
  }
  std::optional<GridIndex> index_of(const Vec3& p) const {
    if (!contains(p)) return std::nullopt;
    GridIndex i{axis_index(p, 0), axis_index(p, 1), axis_index(p, 2)};
    // Guards against p a hair below the upper face rounding up.
    i.x = std::min(i.x, dims_[0] - 1);
    i.y = std::min(i.y, dims_[1] - 1);
    i.z = std::min(i.z, dims_[2] - 1);
    return i;
  }
  std::size_t linear(const GridIndex& i) const {
    return (static_cast<std::size_t>(i.z) * dims_[1] + i.y) * dims_[0] + i.x;
  }
  GridIndex unlinear(std::size_t k) const {
    GridIndex i;
    i.x = static_cast<int>(k % dims_[0]);
    k /= dims_[0];
    i.y = static_cast<int>(k % dims_[1]);
    i.z = static_cast<int>(k / dims_[1]);
    return i;
  }
  double center_coord(int i, int axis) const {
    return origin_[axis] + (static_cast<double>(i) + 0.5) * res_;
  }
  Vec3 center(const GridIndex& i) const {
    return {center_coord(i.x, 0), center_coord(i.y, 1), center_coord(i.z, 2)};
  }

  Occupancy state(const GridIndex& i) const { return state_[linear(i)]; }
  Occupancy state_at(std::size_t linear_index) const { return state_[linear_index]; }
  /// Empty for never-observed cells.
  std::optional<float> log_odds(const GridIndex& i) const {
    const float v = log_odds_[linear(i)];
    if (std::isnan(v)) return std::nullopt;
    return v;
  }
  /// Occupancy of the cell containing p; points outside the map are Unknown.
  Occupancy state_at_point(const Vec3& p) const {
    auto i = index_of(p);
    return i ? state(*i) : Occupancy::Unknown;
  }

  Occupancy classify(float value) const {
    if (std::isnan(value)) return Occupancy::Unknown;
    if (value >= params_.occupied_threshold) return Occupancy::Occupied;
    if (value <= params_.free_threshold) return Occupancy::Free;
    return Occupancy::Unknown;
  }

  /// Overwrites one cell (clamped). Used to build fixtures and ground-truth maps.
  void set_log_odds(const GridIndex& i, float value) {
    const std::size_t k = linear(i);
    log_odds_[k] = std::clamp(value, params_.clamp_min, params_.clamp_max);
    state_[k] = classify(log_odds_[k]);
  }
  void set_state(const GridIndex& i, Occupancy s) {
    switch (s) {
      case Occupancy::Occupied: set_log_odds(i, params_.clamp_max); break;
      case Occupancy::Free: set_log_odds(i, params_.clamp_min); break;
      case Occupancy::Unknown: {
        const std::size_t k = linear(i);
        log_odds_[k] = std::numeric_limits<float>::quiet_NaN();
        state_[k] = Occupancy::Unknown;
        break;
      }
    }
  }
  void fill(Occupancy s) {
    for (std::size_t k = 0; k < size(); ++k) set_state(unlinear(k), s);
  }
  /// Adds one log-odds increment to a cell, starting from 0 if unobserved.
  void update(const GridIndex& i, bool hit) { apply_update(linear(i), hit ? params_.hit : params_.miss); }

  std::size_t count(Occupancy s) const {
    std::size_t n = 0;
    for (auto c : state_) n += (c == s);
    return n;
  }

  /// Integrates one sensor sweep. Each hit adds a hit increment to the voxel containing
  /// it and a miss increment to every voxel strictly between the sensor and the hit.
  /// `free_endpoints` are no-return rays: every voxel up to the endpoint (clipped to the
  /// map) gets a miss. Within one call each voxel is updated at most once and a hit
  /// overrides a miss. Hits outside the map are skipped and tallied.
  ScanStats integrate_scan(const Vec3& sensor_origin, std::span<const Vec3> hits,
                           std::span<const Vec3> free_endpoints = {}) {
    if (!all_finite(sensor_origin) || !contains(sensor_origin))
      throw std::invalid_argument("sensor origin must lie inside the map");
    ScanStats stats;
    if (scan_mark_.size() != size()) scan_mark_.assign(size(), 0);
    touched_.clear();

    auto mark = [&](std::size_t k, std::uint8_t m) {
      if (scan_mark_[k] == 0) touched_.push_back(k);
      if (m > scan_mark_[k]) scan_mark_[k] = m;
    };
    constexpr std::uint8_t kFree = 1, kHit = 2;

    for (const Vec3& p : hits) {
      if (!all_finite(p)) throw std::invalid_argument("scan point is not finite");
      auto hit_index = index_of(p);
      if (!hit_index) {
        ++stats.skipped;
        continue;
      }
      ++stats.hits;
      const std::size_t hit_k = linear(*hit_index);
      const Vec3 delta = p - sensor_origin;
      const double len = delta.norm();
      if (len > 0.0) {
        traverse(sensor_origin, delta / len, len, [&](std::size_t k, const GridIndex&, double) {
          if (k == hit_k) return false;
          mark(k, kFree);
          return true;
        });
      }
      mark(hit_k, kHit);
    }
    for (const Vec3& p : free_endpoints) {
      if (!all_finite(p)) throw std::invalid_argument("scan endpoint is not finite");
      const Vec3 delta = p - sensor_origin;
      const double len = delta.norm();
      if (len == 0.0) continue;
      ++stats.free_rays;
      traverse(sensor_origin, delta / len, len, [&](std::size_t k, const GridIndex&, double) {
        mark(k, kFree);
        return true;
      });
    }
    for (std::size_t k : touched_) {
      apply_update(k, scan_mark_[k] == kHit ? params_.hit : params_.miss);
      scan_mark_[k] = 0;
    }
    stats.voxels_updated = touched_.size();
    skipped_total_ += stats.skipped;
    return stats;
  }

  /// Marks never-observed cells whose centers lie within `radius` of `c` as observed free
  /// (one miss update). Returns the number of cells changed.
  std::size_t seed_free_sphere(const Vec3& c, double radius) {
    std::size_t n = 0;
    for_each_index_in_box(c, radius, [&](const GridIndex& i) {
      const std::size_t k = linear(i);
      if (std::isnan(log_odds_[k]) && (center(i) - c).norm() <= radius) {
        apply_update(k, params_.miss);
        ++n;
      }
    });
    return n;
  }

  /// Visits, in ray order, every voxel intersected by the segment origin + t*dir for
  /// t in [0, max_len] (clipped to the map). The visitor receives the linear index, grid
  /// index and entry distance, and returns false to stop.
  template <class Visitor>
  void traverse(const Vec3& o, const Vec3& d, double max_len, Visitor&& visit) const {
    double t0 = 0.0, t1 = max_len;
    for (int a = 0; a < 3; ++a) {
      const double lo = origin_[a];
      const double hi = origin_[a] + dims_[a] * res_;
      if (d[a] == 0.0) {
        if (o[a] < lo || o[a] >= hi) return;
        continue;
      }
      double ta = (lo - o[a]) / d[a];
      double tb = (hi - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (t0 > t1) return;

    int idx[3], step[3];
    double t_max[3], t_delta[3];
    for (int a = 0; a < 3; ++a) {
      const double p = o[a] + d[a] * t0;
      int i = static_cast<int>(std::floor((p - origin_[a]) / res_));
      i = std::clamp(i, 0, dims_[a] - 1);
      idx[a] = i;
      if (d[a] > 0.0) {
        step[a] = 1;
        t_max[a] = (origin_[a] + (i + 1) * res_ - o[a]) / d[a];
        t_delta[a] = res_ / d[a];
      } else if (d[a] < 0.0) {
        step[a] = -1;
        t_max[a] = (origin_[a] + i * res_ - o[a]) / d[a];
        t_delta[a] = -res_ / d[a];
      } else {
        step[a] = 0;
        t_max[a] = std::numeric_limits<double>::infinity();
        t_delta[a] = std::numeric_limits<double>::infinity();
      }
    }
    const std::size_t sx = 1, sy = static_cast<std::size_t>(dims_[0]),
                      sz = static_cast<std::size_t>(dims_[0]) * dims_[1];
    const std::size_t strides[3] = {sx, sy, sz};
    std::size_t k = idx[2] * sz + idx[1] * sy + idx[0];
    double t_entry = t0;
    for (;;) {
      if (!visit(k, GridIndex{idx[0], idx[1], idx[2]}, t_entry)) return;
      const int a = (t_max[0] < t_max[1]) ? (t_max[0] < t_max[2] ? 0 : 2)
                                          : (t_max[1] < t_max[2] ? 1 : 2);
      if (t_max[a] > t1) return;
      t_entry = t_max[a];
      idx[a] += step[a];
      if (idx[a] < 0 || idx[a] >= dims_[a]) return;
      if (step[a] > 0)
        k += strides[a];
      else
        k -= strides[a];
      t_max[a] += t_delta[a];
    }
  }

  /// First voxel along the ray classified as an obstacle under `policy`. Parts of the
  /// ray outside the map are treated as free.
  RaycastResult raycast(const Vec3& o, const Vec3& dir, double max_len,
                        ObstaclePolicy policy = ObstaclePolicy::OccupiedOrUnknown) const {
    if (!(max_len > 0.0)) throw std::invalid_argument("raycast length must be > 0");
    if (std::abs(dir.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("raycast direction must be a unit vector");
    RaycastResult r{HitKind::Miss, max_len, std::nullopt};
    traverse(o, dir, max_len, [&](std::size_t k, const GridIndex& i, double t) {
      const Occupancy s = state_[k];
      if (is_obstacle(s, policy)) {
        r.hit = (s == Occupancy::Occupied) ? HitKind::Occupied : HitKind::Unknown;
        r.distance = t;
        r.voxel = i;
        return false;
      }
      return true;
    });
    return r;
  }

  /// Distance from `p` to the center of the nearest obstacle voxel whose center lies
  /// within `radius`; 0 when `p` itself lies in an obstacle voxel.
  std::optional<double> nearest_obstacle_distance(
      const Vec3& p, double radius,
      ObstaclePolicy policy = ObstaclePolicy::OccupiedOrUnknown) const {
    if (!(radius > 0.0)) throw std::invalid_argument("search radius must be > 0");
    if (auto i = index_of(p); i && is_obstacle(state(*i), policy)) return 0.0;
    const double r2 = radius * radius;
    double best = std::numeric_limits<double>::infinity();
    for_each_index_in_box(p, radius, [&](const GridIndex& i) {
      if (!is_obstacle(state(i), policy)) return;
      const double d2 = center_distance_sq(i, p);
      if (d2 <= r2 && d2 < best) best = d2;
    });
    if (std::isinf(best)) return std::nullopt;
    return std::sqrt(best);
  }

  double center_distance_sq(const GridIndex& i, const Vec3& p) const {
    const double dx = center_coord(i.x, 0) - p.x();
    const double dy = center_coord(i.y, 1) - p.y();
    const double dz = center_coord(i.z, 2) - p.z();
    return dx * dx + dy * dy + dz * dz;
  }

  /// Inclusive index range of cells whose extent overlaps [lo_pt, hi_pt], clipped to
  /// the grid. Returns false when the box misses the grid.
  bool index_range(const Vec3& lo_pt, const Vec3& hi_pt, GridIndex& lo, GridIndex& hi) const {
    int l[3], h[3];
    for (int a = 0; a < 3; ++a) {
      const double fl = std::floor((lo_pt[a] - origin_[a]) / res_);
      const double fh = std::floor((hi_pt[a] - origin_[a]) / res_);
      if (!(fl <= fh) || fh < 0.0 || fl > dims_[a] - 1) return false;
      l[a] = static_cast<int>(std::max(0.0, fl));
      h[a] = static_cast<int>(std::min(static_cast<double>(dims_[a] - 1), fh));
    }
    lo = {l[0], l[1], l[2]};
    hi = {h[0], h[1], h[2]};
    return true;
  }

  bool index_box(const Vec3& p, double r, GridIndex& lo, GridIndex& hi) const {
    return index_range(p - Vec3::Constant(r), p + Vec3::Constant(r), lo, hi);
  }

  template <class F>
  void for_each_index_in_box(const Vec3& p, double r, F&& f) const {
    GridIndex lo, hi;
    if (!index_box(p, r, lo, hi)) return;
    for (int z = lo.z; z <= hi.z; ++z)
      for (int y = lo.y; y <= hi.y; ++y)
        for (int x = lo.x; x <= hi.x; ++x) f(GridIndex{x, y, z});
  }

  /// Bit-level equality of all cells (determinism checks).
  bool same_cells(const VoxelMap& o) const {
    if (dims_ != o.dims_ || origin_ != o.origin_ || res_ != o.res_) return false;
    for (std::size_t k = 0; k < size(); ++k)
      if (std::bit_cast<std::uint32_t>(log_odds_[k]) != std::bit_cast<std::uint32_t>(o.log_odds_[k]))
        return false;
    return state_ == o.state_;
  }

  /// Debug dump: header lines followed by one character per cell in x-fastest order
  /// ('.' free, '#' occupied, '?' unknown), one z-slice row per line.
  void write_snapshot(std::ostream& os) const {
    os << "dwa3d-voxel-map 1\n";
    os.precision(17);
    os << "resolution " << res_ << "\n";
    os << "origin " << origin_.x() << ' ' << origin_.y() << ' ' << origin_.z() << "\n";
    os << "dims " << dims_[0] << ' ' << dims_[1] << ' ' << dims_[2] << "\n";
    std::string row(static_cast<std::size_t>(dims_[0]), '?');
    for (int z = 0; z < dims_[2]; ++z)
      for (int y = 0; y < dims_[1]; ++y) {
        for (int x = 0; x < dims_[0]; ++x) {
          const Occupancy s = state({x, y, z});
          row[x] = s == Occupancy::Free ? '.' : s == Occupancy::Occupied ? '#' : '?';
        }
        os << row << '\n';
      }
  }

  /// Reads a snapshot written by write_snapshot. Cell states are restored with clamped
  /// log-odds, so only classifications survive the round trip.
  static VoxelMap read_snapshot(std::istream& is, LogOddsParams params = {}) {
    std::string tag;
    int version = 0;
    double res = 0;
    Vec3 o;
    std::array<int, 3> dims{};
    if (!(is >> tag >> version) || tag != "dwa3d-voxel-map" || version != 1)
      throw std::runtime_error("not a voxel map snapshot");
    if (!(is >> tag >> res) || tag != "resolution") throw std::runtime_error("snapshot: resolution");
    if (!(is >> tag >> o.x() >> o.y() >> o.z()) || tag != "origin")
      throw std::runtime_error("snapshot: origin");
    if (!(is >> tag >> dims[0] >> dims[1] >> dims[2]) || tag != "dims")
      throw std::runtime_error("snapshot: dims");
    VoxelMap m(o, res, dims, params);
    std::string row;
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y) {
        if (!(is >> row) || static_cast<int>(row.size()) != dims[0])
          throw std::runtime_error("snapshot: truncated cell data");
        for (int x = 0; x < dims[0]; ++x) {
          const char c = row[x];
          if (c == '.') m.set_state({x, y, z}, Occupancy::Free);
          else if (c == '#') m.set_state({x, y, z}, Occupancy::Occupied);
          else if (c != '?') throw std::runtime_error("snapshot: bad cell character");
        }
      }
    return m;
  }

 private:
  int axis_index(const Vec3& p, int a) const {
    return static_cast<int>(std::floor((p[a] - origin_[a]) / res_));
  }
  void apply_update(std::size_t k, float delta) {
    float v = log_odds_[k];
    if (std::isnan(v)) v = 0.0f;
    v = std::clamp(v + delta, params_.clamp_min, params_.clamp_max);
    log_odds_[k] = v;
    state_[k] = classify(v);
  }

  Vec3 origin_;
  double res_;
  std::array<int, 3> dims_;
  LogOddsParams params_;
  std::vector<float> log_odds_;
  std::vector<Occupancy> state_;
  std::size_t skipped_total_ = 0;
  // Per-scan scratch, reused across calls.
  std::vector<std::uint8_t> scan_mark_;
  std::vector<std::size_t> touched_;
};

}  // namespace dwa3d
