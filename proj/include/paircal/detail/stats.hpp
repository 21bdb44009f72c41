#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace paircal::detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Two-sided normal p-value for an estimate with standard error se.
inline double two_sided_normal_p(double point, double se) {
  if (se <= 0.0) return point == 0.0 ? 1.0 : 0.0;
  return 2.0 * normal_cdf(-std::fabs(point / se));
}

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Unbiased (n-1 divisor) sample variance.
inline double sample_variance(std::span<const double> x) {
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) {
    const double d = v - m;
    ss += d * d;
  }
  return ss / static_cast<double>(x.size() - 1);
}

}  // namespace paircal::detail
