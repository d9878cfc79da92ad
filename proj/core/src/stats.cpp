#include "mombayes/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mombayes/errors.hpp"

namespace mombayes {

double mean(std::span<const double> x) {
  if (x.empty()) throw EmptyData("mean of an empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double median(std::span<const double> x) {
  if (x.empty()) throw EmptyData("median of an empty sample");
  std::vector<double> tmp(x.begin(), x.end());
  const std::size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
  const double upper = tmp[mid];
  if (tmp.size() % 2 == 1) return upper;
  const double lower = *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double median_absolute_deviation(std::span<const double> x) {
  const double m = median(x);
  std::vector<double> dev(x.size());
  std::transform(x.begin(), x.end(), dev.begin(), [m](double v) { return std::abs(v - m); });
  return median(dev);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw EmptyData("quantile of an empty sample");
  p = std::clamp(p, 0.0, 1.0);
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double ks_standard_normal(std::vector<double> x) {
  if (x.empty()) throw EmptyData("KS statistic of an empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

}  // namespace mombayes
