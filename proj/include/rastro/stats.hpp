// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "rastro/error.hpp"

namespace rastro {

/// Five-number summary plus mean and sample standard deviation.
struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sample_std = 0.0;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Quantile of sorted data by linear interpolation between order
/// statistics at position (n - 1) * p.
inline double interpolated_quantile(std::span<const double> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline SummaryStats summarize(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("summarize needs at least one sample");
  SummaryStats s;
  // Welford's update keeps the variance accurate for tightly clustered data.
  double mean = 0.0;
  double m2 = 0.0;
  for (double x : samples) {
    if (!std::isfinite(x)) throw InvalidArgument("summarize got a non-finite sample");
    ++s.n;
    const double delta = x - mean;
    mean += delta / static_cast<double>(s.n);
    m2 += delta * (x - mean);
  }
  s.mean = mean;
  s.sample_std = s.n > 1 ? std::sqrt(std::max(0.0, m2) / static_cast<double>(s.n - 1)) : 0.0;

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.q1 = interpolated_quantile(sorted, 0.25);
  s.median = interpolated_quantile(sorted, 0.5);
  s.q3 = interpolated_quantile(sorted, 0.75);
  return s;
}

inline SummaryStats summarize(const std::vector<double>& samples) {
  return summarize(std::span<const double>(samples));
}

/// `"91.1% +- 0.3%"`: mean and sample std as percentages, one decimal.
inline std::string format_summary(const SummaryStats& s) {
  return fmt::format("{:.1f}% +- {:.1f}%", s.mean * 100.0, s.sample_std * 100.0);
}

}  // namespace rastro
