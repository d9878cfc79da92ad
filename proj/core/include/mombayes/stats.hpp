#pragma once

#include <span>
#include <vector>

namespace mombayes {

double mean(std::span<const double> x);
/// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double variance(std::span<const double> x);
/// Average of the two central order statistics when the length is even.
double median(std::span<const double> x);
/// Median absolute deviation about the median (unscaled).
double median_absolute_deviation(std::span<const double> x);
/// Linear-interpolation empirical quantile (R type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

double normal_cdf(double z);

/// Kolmogorov distance between the empirical CDF of `x` and the standard normal.
double ks_standard_normal(std::vector<double> x);

}  // namespace mombayes
