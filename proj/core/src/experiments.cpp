#include "mombayes/experiments.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "mombayes/errors.hpp"

namespace mombayes {

Dataset simulate_location(const LocationSetup& s) {
  std::mt19937_64 rng(chain_seed(s.seed, 0));
  std::normal_distribution<double> noise(s.theta0, s.sigma);
  std::vector<double> x(s.N);
  for (double& v : x) v = noise(rng);
  Dataset data = Dataset::scalars(std::move(x));
  if (s.outliers > 0)
    data = contaminate(data, ContaminationSpec::gaussian(s.outliers, s.outlier_mean, s.outlier_sd,
                                                         chain_seed(s.seed, 1)));
  return data;
}

RobustPosterior location_posterior(const LocationSetup& s, const Dataset& data, bool uniform_prior) {
  constexpr double kWide = 1e12;
  const auto wide = LikelihoodFamily::gaussian_location(
      s.sigma, Box(Vector::Constant(1, -kWide), Vector::Constant(1, kWide)));
  BlockPartition part = partition_blocks(data.size(), s.k, s.scheme, chain_seed(s.seed, 2));
  const double mle = closed_form_mle(wide, data)[0];
  const double pilot = blockwise_median_mle(wide, data, part)[0];
  const Box box(Vector::Constant(1, std::min(mle, pilot) - 50.0 * s.sigma),
                Vector::Constant(1, std::max(mle, pilot) + 50.0 * s.sigma));
  const auto family = wide.with_domain(box);
  const Vector theta_prime = Vector::Constant(1, pilot + s.reference_offset * s.sigma);

  ScaleSchedule schedule;
  if (s.delta_c) {
    schedule.c = *s.delta_c;
    schedule.exponent = s.delta_exponent;
  } else {
    schedule = calibrate_schedule(family, theta_prime, data, part, s.delta_exponent);
  }
  Prior prior = uniform_prior ? Prior::uniform_box(box)
                              : Prior::gaussian_diagonal(box, Vector::Constant(1, s.prior_mean),
                                                         Vector::Constant(1, s.prior_sd));
  return RobustPosterior(family, std::move(prior), ReferencePoint(theta_prime, box), data,
                         std::move(part), Rho(s.rho), schedule);
}

ConjugateNormal location_standard_posterior(const LocationSetup& s, const Dataset& data) {
  return conjugate_normal_posterior(data.values(), s.sigma, s.prior_mean, s.prior_sd);
}

const std::vector<std::string>& wine_regressors() {
  static const std::vector<std::string> names{
      "fixed.acidity", "volatile.acidity", "residual.sugar", "free.sulfur.dioxide",
      "density",       "pH",               "sulphates",      "alcohol"};
  return names;
}

RobustPosterior regression_posterior(const RegressionSetup& s, const Dataset& data) {
  const auto p = static_cast<Eigen::Index>(data.covariate_dim());
  if (p == 0) throw InvalidArgument("regression data needs covariates");
  Vector lower(p + 1), upper(p + 1);
  lower.head(p).setConstant(-s.beta_bound);
  upper.head(p).setConstant(s.beta_bound);
  lower[p] = s.sigma_lower;
  upper[p] = s.sigma_upper;
  const Box box(lower, upper);
  const auto family =
      LikelihoodFamily::linear_regression(static_cast<std::size_t>(p), box).with_design_moment(data);

  std::vector<CoordinatePrior> coords(static_cast<std::size_t>(p),
                                      {CoordinatePrior::Kind::gaussian, 0.0, s.beta_prior_sd});
  coords.push_back({CoordinatePrior::Kind::uniform, 0.0, 1.0});
  Prior prior = Prior::product(box, std::move(coords));
  const Vector theta_prime = prior.default_reference();

  BlockPartition part = partition_blocks(data.size(), s.k, s.scheme, chain_seed(s.seed, 2));
  ScaleSchedule schedule;
  if (s.delta_c) {
    schedule.c = *s.delta_c;
    schedule.exponent = s.delta_exponent;
  } else {
    schedule = calibrate_schedule(family, theta_prime, data, part, s.delta_exponent);
  }
  return RobustPosterior(family, std::move(prior), ReferencePoint(theta_prime, box), data,
                         std::move(part), Rho(s.rho), schedule);
}

}  // namespace mombayes
