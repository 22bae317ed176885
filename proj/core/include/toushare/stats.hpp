#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace toushare {

// Welford accumulator.
class RunningStat {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double sd() const { return std::sqrt(variance()); }
  double std_error() const { return n_ > 0 ? sd() / std::sqrt(static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Empirical quantile: linear interpolation between order statistics.
// Sorts a copy; callers with a pre-sorted vector use quantile_sorted.
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  if (prob <= 0.0) return sorted.front();
  if (prob >= 1.0) return sorted.back();
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

inline double quantile(std::vector<double> sample, double prob) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, prob);
}

// Freedman-Diaconis histogram density evaluated at one point. The sample must
// be sorted. Density estimates are floored to keep downstream weight ratios
// finite when the evaluation point falls in an empty bin.
inline double histogram_density(const std::vector<double>& sorted, double at,
                                double floor_value = 1e-9) {
  if (sorted.size() < 2) return floor_value;
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double n = static_cast<double>(sorted.size());
  double width = 2.0 * iqr / std::cbrt(n);
  if (width <= 0.0) {
    const double span = sorted.back() - sorted.front();
    width = span > 0.0 ? span / std::sqrt(n) : 1.0;
  }
  const double lo = at - width / 2.0;
  const double hi = at + width / 2.0;
  const auto begin = std::lower_bound(sorted.begin(), sorted.end(), lo);
  const auto end = std::upper_bound(sorted.begin(), sorted.end(), hi);
  const double count = static_cast<double>(std::distance(begin, end));
  const double dens = count / (n * width);
  return std::max(dens, floor_value);
}

// Mean/SE of pairwise differences a[i]-b[i].
inline Estimate paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("paired samples must align");
  RunningStat st;
  for (std::size_t i = 0; i < a.size(); ++i) st.add(a[i] - b[i]);
  return {st.mean(), st.std_error()};
}

inline Estimate mean_estimate(const std::vector<double>& xs) {
  RunningStat st;
  for (double x : xs) st.add(x);
  return {st.mean(), st.std_error()};
}

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

}  // namespace toushare
