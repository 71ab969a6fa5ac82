#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace dwa3d {

struct TimingStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  friend bool operator==(const TimingStats&, const TimingStats&) = default;
};

/// Percentile of sorted data with linear interpolation between closest ranks
/// (rank = q * (n - 1)).
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
  const double rank = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

inline TimingStats timing_stats(std::vector<double> xs) {
  TimingStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  std::sort(xs.begin(), xs.end());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  s.median = percentile_sorted(xs, 0.5);
  s.p95 = percentile_sorted(xs, 0.95);
  s.max = xs.back();
  return s;
}

}  // namespace dwa3d
