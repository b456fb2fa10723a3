#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "novo/error.hpp"

namespace novo {

// Linear-interpolation quantile of sorted data, q in [0, 1]:
// position h = (n - 1) q, interpolated between floor(h) and ceil(h).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of empty sequence");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct SummaryStats {
  std::size_t count = 0;
  double mean = 0;
  double stddev = 0;  // population
  double min = 0;
  double q25 = 0;
  double q50 = 0;
  double q75 = 0;
  double max = 0;
};

inline SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw DataError("summary of empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  SummaryStats s;
  s.count = sorted.size();
  s.min = sorted.front();
  s.max = sorted.back();
  if (s.min == s.max) {
    s.mean = s.q25 = s.q50 = s.q75 = s.min;
    return s;
  }
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  double ss = 0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / static_cast<double>(s.count));
  s.q25 = quantile_sorted(sorted, 0.25);
  s.q50 = quantile_sorted(sorted, 0.50);
  s.q75 = quantile_sorted(sorted, 0.75);
  return s;
}

}  // namespace novo
