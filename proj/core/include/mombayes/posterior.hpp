#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mombayes/models.hpp"
#include "mombayes/mom.hpp"
#include "mombayes/rho.hpp"

namespace mombayes {

/// Unnormalized log density on a box, the interface consumed by samplers and
/// the MAP search. Evaluation outside the box throws DomainError.
class LogDensity {
 public:
  virtual ~LogDensity() = default;

  virtual const Box& domain() const = 0;
  virtual double log_density(const Vector& theta) const = 0;
  virtual Vector gradient(const Vector& theta) const = 0;
  /// Density and gradient in one pass; the default calls both.
  virtual double log_density_and_gradient(const Vector& theta, Vector& grad) const {
    grad = gradient(theta);
    return log_density(theta);
  }
  virtual bool differentiable() const { return true; }

  Eigen::Index dim() const { return domain().dim(); }
};

/**
 * Robust posterior kernel exp(-N_eff * Lhat(theta)) * pi(theta), where Lhat is
 * the median-of-means estimate of the mean log-likelihood increment and
 * N_eff = k * n counts the observations the blocks actually use.
 */
class RobustPosterior final : public LogDensity {
 public:
  RobustPosterior(LikelihoodFamily family, Prior prior, ReferencePoint theta_prime, Dataset data,
                  BlockPartition partition, Rho rho, ScaleSchedule schedule);

  const Box& domain() const override { return family_.domain(); }
  double log_density(const Vector& theta) const override { return log_kernel(theta); }
  Vector gradient(const Vector& theta) const override { return grad_log_kernel(theta); }
  double log_density_and_gradient(const Vector& theta, Vector& grad) const override;
  bool differentiable() const override { return rho_.differentiable(); }

  MomEstimate estimate(const Vector& theta) const;
  double log_kernel(const Vector& theta) const;
  /// Implicit-function gradient; central differences of log_kernel on FlatScore.
  Vector grad_log_kernel(const Vector& theta) const;

  double effective_size() const { return static_cast<double>(partition_.effective_size()); }

  const LikelihoodFamily& family() const { return family_; }
  const Prior& prior() const { return prior_; }
  const Vector& theta_prime() const { return theta_prime_.theta(); }
  const Dataset& data() const { return data_; }
  const BlockPartition& partition() const { return partition_; }
  const Rho& rho() const { return rho_; }
  const ScaleSchedule& schedule() const { return schedule_; }

 private:
  Vector finite_difference_gradient(const Vector& theta) const;

  LikelihoodFamily family_;
  Prior prior_;
  ReferencePoint theta_prime_;
  Dataset data_;
  BlockPartition partition_;
  Rho rho_;
  ScaleSchedule schedule_;
};

/// Classical posterior: -sum_i (l(theta, X_i) - l(theta', X_i)) + log pi(theta).
class StandardPosterior final : public LogDensity {
 public:
  StandardPosterior(LikelihoodFamily family, Prior prior, ReferencePoint theta_prime, Dataset data);

  const Box& domain() const override { return family_.domain(); }
  double log_density(const Vector& theta) const override;
  Vector gradient(const Vector& theta) const override;

 private:
  LikelihoodFamily family_;
  Prior prior_;
  ReferencePoint theta_prime_;
  Dataset data_;
};

/// Posterior of a Gaussian mean with known sigma under a N(prior_mean, prior_sd^2) prior.
struct ConjugateNormal {
  double mean;
  double sd;
};
ConjugateNormal conjugate_normal_posterior(std::span<const double> data, double sigma,
                                           double prior_mean, double prior_sd);

struct MapOptions {
  int max_iterations = 500;
  /// Stop when the projected gradient norm falls below this.
  double gradient_tolerance = 1e-8;
  /// Stop when a full step changes the log density by less than this.
  double value_tolerance = 1e-12;
};

struct MapResult {
  Vector theta;
  double log_density = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  /// False when no iterate improved on its starting point (OptimizationFailed).
  bool improved = true;
  bool converged = false;
};

/**
 * Maximizes `target` from each start and returns the best optimum.
 *
 * Differentiable targets use projected quasi-Newton ascent (BFGS direction,
 * coordinates pinned at a bound are frozen) with a backtracking Armijo line
 * search; nondifferentiable targets use compass search.
 */
MapResult maximize(const LogDensity& target, std::span<const Vector> starts,
                   const MapOptions& options = {});

/// MAP of the robust posterior from `restarts` prior draws plus the closed-form MLE.
MapResult map_estimate(const RobustPosterior& post, int restarts, std::uint64_t seed);

}  // namespace mombayes
