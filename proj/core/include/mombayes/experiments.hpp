#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mombayes/diagnostics.hpp"
#include "mombayes/posterior.hpp"

namespace mombayes {

/// Gaussian location data with known sigma, optionally contaminated.
struct LocationSetup {
  std::size_t N = 1000;
  double theta0 = -30.0;
  double sigma = 1.0;
  std::size_t outliers = 0;
  double outlier_mean = 1e4;
  double outlier_sd = 1.0;
  double prior_mean = -29.5;
  double prior_sd = 1.0;
  int k = 100;
  RhoSpec rho{};
  PartitionScheme scheme = PartitionScheme::shuffled;
  /// theta' = pilot + reference_offset * sigma. Keeps theta' outside the bulk
  /// of the posterior, where outlying blocks would flip sign.
  double reference_offset = -5.0;
  std::optional<double> delta_c;  // unset: calibrate
  double delta_exponent = 0.25;
  std::uint64_t seed = 1;
};

Dataset simulate_location(const LocationSetup& setup);

/**
 * Robust posterior for a location setup. The box is the hull of the
 * full-sample MLE and the blockwise-median pilot, widened by 50 sigma.
 * `uniform_prior` swaps the Gaussian prior for a flat one (theta tilde).
 */
RobustPosterior location_posterior(const LocationSetup& setup, const Dataset& data,
                                   bool uniform_prior = false);

/// Classical posterior of the same setup (conjugate normal, in closed form).
ConjugateNormal location_standard_posterior(const LocationSetup& setup, const Dataset& data);

/// The 8 regressors used for the white-wine model, in column order.
const std::vector<std::string>& wine_regressors();

struct RegressionSetup {
  int k = 31;
  RhoSpec rho{};
  PartitionScheme scheme = PartitionScheme::shuffled;
  double beta_bound = 10.0;
  double beta_prior_sd = 10.0;
  double sigma_lower = 1e-3;
  double sigma_upper = 1.0;
  std::optional<double> delta_c;
  double delta_exponent = 0.25;
  std::uint64_t seed = 1;
};

/**
 * Regression posterior: beta ~ N(0, sd^2) per coordinate and sigma uniform on
 * (sigma_lower, sigma_upper]. `data` must already carry the intercept column.
 */
RobustPosterior regression_posterior(const RegressionSetup& setup, const Dataset& data);

}  // namespace mombayes
