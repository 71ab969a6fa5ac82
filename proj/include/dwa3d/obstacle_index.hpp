#pragma once

#include "dwa3d/voxel_map.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace dwa3d {

/// Snapshot of the obstacle voxel centers inside a region of a VoxelMap, bucketed so
/// that radius queries touch only nearby cells. Answers are identical to the
/// corresponding VoxelMap queries whenever the query box lies inside the region;
/// otherwise the query falls through to the map.
class ObstacleIndex {
 public:
  ObstacleIndex(const VoxelMap& map, ObstaclePolicy policy, const Vec3& region_lo,
                const Vec3& region_hi, int bucket_voxels = 4)
      : map_(&map), policy_(policy), bucket_(bucket_voxels) {
    if (!map.index_range(region_lo, region_hi, lo_, hi_)) {
      empty_region_ = true;
      return;
    }
    for (int a = 0; a < 3; ++a) nb_[a] = (axis(hi_, a) - axis(lo_, a)) / bucket_ + 1;
    const std::size_t nbuckets = static_cast<std::size_t>(nb_[0]) * nb_[1] * nb_[2];
    std::vector<std::uint32_t> counts(nbuckets + 1, 0);
    auto bucket_of = [&](const GridIndex& i) {
      const int bx = (i.x - lo_.x) / bucket_, by = (i.y - lo_.y) / bucket_,
                bz = (i.z - lo_.z) / bucket_;
      return (static_cast<std::size_t>(bz) * nb_[1] + by) * nb_[0] + bx;
    };
    for (int z = lo_.z; z <= hi_.z; ++z)
      for (int y = lo_.y; y <= hi_.y; ++y)
        for (int x = lo_.x; x <= hi_.x; ++x)
          if (is_obstacle(map.state({x, y, z}), policy_)) ++counts[bucket_of({x, y, z}) + 1];
    for (std::size_t b = 0; b < nbuckets; ++b) counts[b + 1] += counts[b];
    start_ = counts;
    cells_.resize(start_.back());
    std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
    for (int z = lo_.z; z <= hi_.z; ++z)
      for (int y = lo_.y; y <= hi_.y; ++y)
        for (int x = lo_.x; x <= hi_.x; ++x)
          if (is_obstacle(map.state({x, y, z}), policy_)) cells_[fill[bucket_of({x, y, z})]++] = {x, y, z};
  }

  std::size_t obstacle_count() const { return cells_.size(); }
  ObstaclePolicy policy() const { return policy_; }

  /// True when the query box of (p, r) is inside the indexed region.
  bool covers(const Vec3& p, double r) const {
    if (empty_region_) return false;
    GridIndex lo, hi;
    if (!map_->index_box(p, r, lo, hi)) return true;  // entirely off-map: nothing to find
    return lo.x >= lo_.x && lo.y >= lo_.y && lo.z >= lo_.z && hi.x <= hi_.x &&
           hi.y <= hi_.y && hi.z <= hi_.z;
  }

  /// True when some obstacle voxel center lies within r of p.
  bool any_within(const Vec3& p, double r) const {
    if (!covers(p, r)) {
      bool found = false;
      const double r2 = r * r;
      map_->for_each_index_in_box(p, r, [&](const GridIndex& i) {
        if (!found && is_obstacle(map_->state(i), policy_) && map_->center_distance_sq(i, p) <= r2)
          found = true;
      });
      return found;
    }
    const double r2 = r * r;
    bool found = false;
    visit_buckets(p, r, [&](const GridIndex& i) {
      if (map_->center_distance_sq(i, p) <= r2) {
        found = true;
        return false;
      }
      return true;
    });
    return found;
  }

  /// Same contract as VoxelMap::nearest_obstacle_distance.
  std::optional<double> nearest_within(const Vec3& p, double r) const {
    if (!covers(p, r)) return map_->nearest_obstacle_distance(p, r, policy_);
    if (auto i = map_->index_of(p); i && is_obstacle(map_->state(*i), policy_)) return 0.0;
    const double r2 = r * r;
    double best = std::numeric_limits<double>::infinity();
    visit_buckets(p, r, [&](const GridIndex& i) {
      const double d2 = map_->center_distance_sq(i, p);
      if (d2 <= r2 && d2 < best) best = d2;
      return true;
    });
    if (std::isinf(best)) return std::nullopt;
    return std::sqrt(best);
  }

  /// Calls f(center) for every obstacle voxel center within r of p. Requires covers(p, r).
  template <class F>
  void for_each_within(const Vec3& p, double r, F&& f) const {
    const double r2 = r * r;
    visit_buckets(p, r, [&](const GridIndex& i) {
      if (map_->center_distance_sq(i, p) <= r2) f(map_->center(i));
      return true;
    });
  }

  /// True when some obstacle voxel center lies within r of segment [a, b].
  bool any_near_segment(const Vec3& a, const Vec3& b, double r) const {
    const Vec3 mid = 0.5 * (a + b);
    const double reach = 0.5 * (b - a).norm() + r;
    auto test = [&](const GridIndex& i) {
      return point_segment_distance(map_->center(i), a, b) <= r;
    };
    if (!covers(mid, reach)) {
      bool found = false;
      map_->for_each_index_in_box(mid, reach, [&](const GridIndex& i) {
        if (!found && is_obstacle(map_->state(i), policy_) && test(i)) found = true;
      });
      return found;
    }
    bool found = false;
    // Bucket pruning uses the segment's bounding box grown by r.
    const Vec3 lo = a.cwiseMin(b) - Vec3::Constant(r), hi = a.cwiseMax(b) + Vec3::Constant(r);
    visit_buckets_box(lo, hi, [&](const GridIndex& i) {
      if (test(i)) {
        found = true;
        return false;
      }
      return true;
    });
    return found;
  }

 private:
  static int axis(const GridIndex& i, int a) { return a == 0 ? i.x : a == 1 ? i.y : i.z; }

  template <class F>
  void visit_buckets(const Vec3& p, double r, F&& f) const {
    visit_buckets_box(p - Vec3::Constant(r), p + Vec3::Constant(r), std::forward<F>(f), &p, r);
  }

  // Visits obstacle cells in buckets overlapping [lo, hi]; when a ball is given, buckets
  // whose cell-center hull is farther than r from its center are skipped.
  template <class F>
  void visit_buckets_box(const Vec3& lo, const Vec3& hi, F&& f, const Vec3* ball = nullptr,
                         double r = 0.0) const {
    const double res = map_->resolution();
    const Vec3& o = map_->origin();
    int blo[3], bhi[3];
    const int base[3] = {lo_.x, lo_.y, lo_.z};
    for (int a = 0; a < 3; ++a) {
      const double fl = std::max<double>(std::floor((lo[a] - o[a]) / res), base[a]);
      const double fh = std::min<double>(std::floor((hi[a] - o[a]) / res), axis(hi_, a));
      if (!(fl <= fh)) return;
      const int il = static_cast<int>(fl), ih = static_cast<int>(fh);
      blo[a] = (il - base[a]) / bucket_;
      bhi[a] = (ih - base[a]) / bucket_;
    }
    const double r2 = r * r;
    for (int bz = blo[2]; bz <= bhi[2]; ++bz)
      for (int by = blo[1]; by <= bhi[1]; ++by)
        for (int bx = blo[0]; bx <= bhi[0]; ++bx) {
          const std::size_t b = (static_cast<std::size_t>(bz) * nb_[1] + by) * nb_[0] + bx;
          const std::uint32_t s = start_[b], e = start_[b + 1];
          if (s == e) continue;
          if (ball) {
            const int bi[3] = {bx, by, bz};
            double d2 = 0.0;
            for (int a = 0; a < 3; ++a) {
              const int c0 = base[a] + bi[a] * bucket_;
              const int c1 = std::min(c0 + bucket_ - 1, axis(hi_, a));
              const double lo_c = map_->center_coord(c0, a), hi_c = map_->center_coord(c1, a);
              const double v = (*ball)[a];
              const double gap = v < lo_c ? lo_c - v : (v > hi_c ? v - hi_c : 0.0);
              d2 += gap * gap;
            }
            // Slack keeps the prune conservative against rounding in center_distance_sq.
            if (d2 > r2 * (1.0 + 1e-12) + 1e-12) continue;
          }
          for (std::uint32_t k = s; k < e; ++k)
            if (!f(cells_[k])) return;
        }
  }

  const VoxelMap* map_;
  ObstaclePolicy policy_;
  int bucket_;
  bool empty_region_ = false;
  GridIndex lo_, hi_;
  int nb_[3] = {0, 0, 0};
  std::vector<std::uint32_t> start_;
  std::vector<GridIndex> cells_;
};

}  // namespace dwa3d
