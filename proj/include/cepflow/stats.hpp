#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cepflow {

// Welford mean/variance accumulator. Used for inter-arrival and service
// time statistics, which feed the squared coefficients of variation in
// the waiting-time estimators.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  void reset() { *this = RunningStats{}; }

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }

  double variance() const {
    return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
  }

  // Squared coefficient of variation, var/mean^2. Zero until two samples
  // exist or when the mean is zero.
  double squared_cv() const {
    if (n_ < 2 || mean_ == 0.0) return 0.0;
    return variance() / (mean_ * mean_);
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Order statistics over a sample vector. Quantile uses the nearest-rank
// method on a sorted copy.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double rank = q * static_cast<double>(xs.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace cepflow
