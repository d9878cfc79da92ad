#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "mombayes/mom.hpp"
#include "mombayes/posterior.hpp"
#include "mombayes/rho.hpp"
#include "mombayes/sampler.hpp"

namespace mombayes {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct PosteriorSummary {
  Vector map;
  double map_log_density = 0.0;
  Vector mean;
  Vector sd;
  std::vector<Interval> credible_intervals;  // equal-tailed, level 1 - alpha
  Vector ess;
  Vector rhat;
  double alpha = 0.05;
  std::size_t draws = 0;
};

/**
 * Pools the chains. The MAP is the highest-kernel draw, refined by a local
 * ascent on `refine` when given. R-hat uses split chains; ESS is the batch-means
 * estimate summed over chains.
 */
PosteriorSummary summarize(const std::vector<Chain>& chains, double alpha,
                           const LogDensity* refine = nullptr);

/// Split R-hat of one coordinate across chains.
double split_rhat(const std::vector<Chain>& chains, Eigen::Index coord);
/// Batch-means effective sample size of one coordinate, summed over chains.
double batch_means_ess(const std::vector<Chain>& chains, Eigen::Index coord);

struct BvmReport {
  Vector ks_statistic;
  Vector center;
  Matrix reference_covariance;
};

/// Per-coordinate Kolmogorov distance of (theta_i - center_i) / sqrt(cov_ii) to N(0, 1).
BvmReport bvm_diagnostic(const std::vector<Chain>& chains, const Vector& center,
                         const Matrix& covariance);

/// I(theta)^{-1} / n.
Matrix plugin_covariance(const LikelihoodFamily& family, const Vector& theta, double n);

struct ContaminationSpec {
  enum class Generator { point_mass, gaussian };

  std::size_t count = 0;
  Generator generator = Generator::point_mass;
  double value = 0.0;  // point mass location, or gaussian mean
  double sd = 1.0;     // gaussian only
  std::uint64_t seed = 0;

  static ContaminationSpec point_mass(std::size_t count, double value, std::uint64_t seed);
  static ContaminationSpec gaussian(std::size_t count, double mean, double sd, std::uint64_t seed);
};

/// Copy of `data` with a seeded uniform subset of `count` responses replaced.
Dataset contaminate(const Dataset& data, const ContaminationSpec& spec);
/// The indices contaminate() replaces, in replacement order.
std::vector<std::size_t> contamination_indices(std::size_t n, const ContaminationSpec& spec);

struct DeviationConfig {
  LikelihoodFamily family;
  Vector theta0;
  Vector theta;
  Vector theta_prime;
  std::size_t N = 200;
  int k = 100;
  RhoSpec rho{};
  ScaleSchedule schedule{};
  PartitionScheme scheme = PartitionScheme::shuffled;
  /// The seed inside is replaced by a per-replication one.
  std::optional<ContaminationSpec> contamination{};
  int replications = 500;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct DeviationRow {
  int replication = 0;
  double mom_error = 0.0;   // Lhat - (L(theta) - L(theta'))
  double mean_error = 0.0;  // full-sample mean increment - (L(theta) - L(theta'))
};

struct DeviationTable {
  std::vector<DeviationRow> rows;
  double mom_rmse() const;
  double mean_rmse() const;
};

DeviationTable deviation_harness(const DeviationConfig& config);

struct NormalityConfig {
  LikelihoodFamily family;
  Vector theta0;
  /// Offset of theta' from theta0.
  Vector reference_offset;
  std::size_t N = 2000;
  int k = 40;
  RhoSpec rho{};
  /// Unset: calibrate Delta_n on each replication.
  std::optional<ScaleSchedule> schedule{};
  PartitionScheme scheme = PartitionScheme::shuffled;
  int replications = 300;
  std::uint64_t seed = 1;
  int threads = 0;
};

struct NormalityTable {
  /// sqrt(N) (theta_tilde - theta0), one per replication.
  std::vector<Vector> errors;
  /// Sample variance of coordinate `coord`.
  double variance(Eigen::Index coord = 0) const;
  /// KS distance of coordinate `coord` standardized by sqrt(I^{-1}_cc) to N(0, 1).
  double ks(const Matrix& inverse_fisher, Eigen::Index coord = 0) const;
};

NormalityTable normality_harness(const NormalityConfig& config);

/// Runs body(i) for i in [0, count) on up to `threads` workers (0: hardware
/// concurrency). The first exception thrown by any body is rethrown.
void parallel_for(int count, int threads, const std::function<void(int)>& body);

}  // namespace mombayes
