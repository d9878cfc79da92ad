#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mombayes {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Compact parameter box; lower < upper per coordinate.
struct Box {
  Vector lower;
  Vector upper;

  Box() = default;
  Box(Vector lower_bounds, Vector upper_bounds);

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vector& theta) const;
  bool interior(const Vector& theta) const;
  Vector clamp(const Vector& theta) const;
  Vector center() const { return 0.5 * (lower + upper); }
  Vector width() const { return upper - lower; }
};

/// One record: a scalar value, or a response with its covariate row.
struct Observation {
  double value = 0.0;
  std::span<const double> covariates;
};

/// Column store of observations. Covariates are row-major, uniform length.
class Dataset {
 public:
  Dataset() = default;

  static Dataset scalars(std::vector<double> values);
  static Dataset regression(std::vector<double> response, std::vector<double> covariates,
                            std::size_t covariate_dim);

  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t covariate_dim() const { return covariate_dim_; }

  Observation operator[](std::size_t i) const {
    return {values_[i], covariate_dim_ == 0
                            ? std::span<const double>{}
                            : std::span<const double>(covariates_.data() + i * covariate_dim_,
                                                      covariate_dim_)};
  }

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& covariates() const { return covariates_; }

  /// Same covariates, new responses (same length).
  Dataset with_values(std::vector<double> values) const;
  /// Rows in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<double> values_;
  std::vector<double> covariates_;
  std::size_t covariate_dim_ = 0;
};

enum class FamilyKind { gaussian_location, laplace_location, poisson_rate, linear_regression };

FamilyKind parse_family_kind(std::string_view name);
std::string_view to_string(FamilyKind kind);

/// What grad_nll does at the Laplace kink x == theta.
enum class KinkPolicy { throw_error, subgradient_zero };

/**
 * Parametric family of densities p_theta with negative log-likelihood
 * l(theta, x) = -log p_theta(x) (constants free of theta are dropped).
 *
 * Parameter layouts:
 *   gaussian_location  theta = (mu),           sigma fixed
 *   laplace_location   theta = (mu),           scale b fixed
 *   poisson_rate       theta = (lambda),       lambda > 0
 *   linear_regression  theta = (beta_0..beta_{p-1}, sigma), sigma > 0
 */
class LikelihoodFamily {
 public:
  static LikelihoodFamily gaussian_location(double sigma, Box domain);
  static LikelihoodFamily laplace_location(double scale, Box domain);
  static LikelihoodFamily poisson_rate(Box domain);
  /// `covariate_dim` counts the intercept column when the design carries one.
  static LikelihoodFamily linear_regression(std::size_t covariate_dim, Box domain);

  FamilyKind kind() const { return kind_; }
  Eigen::Index dim() const { return domain_.dim(); }
  const Box& domain() const { return domain_; }
  /// sigma for gaussian_location, b for laplace_location, 1 otherwise.
  double fixed_scale() const { return scale_; }

  LikelihoodFamily with_domain(Box domain) const;
  /// Stores E[z z^T] from the design; needed by fisher_information for regression.
  LikelihoodFamily with_design_moment(const Dataset& data) const;

  double nll(const Vector& theta, const Observation& x) const;
  double nll_increment(const Vector& theta, const Vector& theta_prime, const Observation& x) const;
  Vector grad_nll(const Vector& theta, const Observation& x,
                  KinkPolicy kink = KinkPolicy::throw_error) const;
  /// out += weight * grad_nll(theta, x); kinks contribute zero.
  void accumulate_grad_nll(const Vector& theta, const Observation& x, double weight,
                           Eigen::Ref<Vector> out) const;

  Matrix fisher_information(const Vector& theta) const;

  /// Exact L(theta) - L(theta') under data from p_{theta0}; not defined for regression.
  double expected_increment(const Vector& theta, const Vector& theta_prime,
                            const Vector& theta0) const;

  /// One draw from p_theta (scalar families only).
  double simulate(const Vector& theta, std::mt19937_64& rng) const;

  void check_domain(const Vector& theta) const;

 private:
  LikelihoodFamily(FamilyKind kind, double scale, Box domain);

  void check_observation(const Observation& x) const;

  FamilyKind kind_;
  double scale_;
  Box domain_;
  std::optional<Matrix> design_moment_;
};

/// Closed-form maximum likelihood estimate, clamped into the domain.
/// mean / median / mean / OLS with residual scale sqrt(RSS / N).
Vector closed_form_mle(const LikelihoodFamily& family, const Dataset& data);

struct CoordinatePrior {
  enum class Kind { uniform, gaussian };
  Kind kind = Kind::uniform;
  double mean = 0.0;
  double sd = 1.0;
};

/// Product prior over the box: each coordinate uniform on its range or Gaussian.
class Prior {
 public:
  static Prior uniform_box(Box box);
  static Prior gaussian_diagonal(Box box, const Vector& means, const Vector& sds);
  static Prior product(Box box, std::vector<CoordinatePrior> coords);

  const Box& box() const { return box_; }
  const std::vector<CoordinatePrior>& coordinates() const { return coords_; }
  bool is_uniform() const;

  double log_density(const Vector& theta) const;
  Vector grad_log_density(const Vector& theta) const;

  /// Gaussian coordinates at their mean, uniform coordinates at the box center.
  Vector default_reference() const;

  /// Draw clamped into the box.
  Vector sample(std::mt19937_64& rng) const;

 private:
  Prior(Box box, std::vector<CoordinatePrior> coords);

  Box box_;
  std::vector<CoordinatePrior> coords_;
};

/// theta' used to form log-likelihood increments; strictly inside the domain.
class ReferencePoint {
 public:
  ReferencePoint(Vector theta, const Box& domain);
  const Vector& theta() const { return theta_; }

 private:
  Vector theta_;
};

}  // namespace mombayes
