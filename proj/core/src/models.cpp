#include "mombayes/models.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mombayes/errors.hpp"
#include "mombayes/stats.hpp"

namespace mombayes {

Box::Box(Vector lower_bounds, Vector upper_bounds)
    : lower(std::move(lower_bounds)), upper(std::move(upper_bounds)) {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw DomainError("box bounds must be nonempty and of equal length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || !(lower[i] < upper[i]))
      throw DomainError("box coordinate " + std::to_string(i) +
                        " needs finite bounds with lower < upper");
  }
}

bool Box::contains(const Vector& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (!(theta[i] >= lower[i] && theta[i] <= upper[i])) return false;
  return true;
}

bool Box::interior(const Vector& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    if (!(theta[i] > lower[i] && theta[i] < upper[i])) return false;
  return true;
}

Vector Box::clamp(const Vector& theta) const {
  return theta.cwiseMax(lower).cwiseMin(upper);
}

Dataset Dataset::scalars(std::vector<double> values) {
  for (double v : values)
    if (!std::isfinite(v)) throw NonFiniteInput("dataset contains a non-finite value");
  Dataset d;
  d.values_ = std::move(values);
  return d;
}

Dataset Dataset::regression(std::vector<double> response, std::vector<double> covariates,
                            std::size_t covariate_dim) {
  if (covariate_dim == 0 || covariates.size() != response.size() * covariate_dim)
    throw InvalidArgument("covariate matrix does not match the response length");
  for (double v : response)
    if (!std::isfinite(v)) throw NonFiniteInput("response contains a non-finite value");
  for (double v : covariates)
    if (!std::isfinite(v)) throw NonFiniteInput("covariates contain a non-finite value");
  Dataset d;
  d.values_ = std::move(response);
  d.covariates_ = std::move(covariates);
  d.covariate_dim_ = covariate_dim;
  return d;
}

Dataset Dataset::with_values(std::vector<double> values) const {
  if (values.size() != values_.size())
    throw InvalidArgument("replacement values must keep the dataset length");
  for (double v : values)
    if (!std::isfinite(v)) throw NonFiniteInput("dataset contains a non-finite value");
  Dataset d = *this;
  d.values_ = std::move(values);
  return d;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset d;
  d.covariate_dim_ = covariate_dim_;
  d.values_.reserve(rows.size());
  d.covariates_.reserve(rows.size() * covariate_dim_);
  for (std::size_t r : rows) {
    if (r >= size()) throw InvalidArgument("row index out of range");
    d.values_.push_back(values_[r]);
    for (std::size_t c = 0; c < covariate_dim_; ++c)
      d.covariates_.push_back(covariates_[r * covariate_dim_ + c]);
  }
  return d;
}

FamilyKind parse_family_kind(std::string_view name) {
  if (name == "gaussian-location" || name == "gaussian_location") return FamilyKind::gaussian_location;
  if (name == "laplace-location" || name == "laplace_location") return FamilyKind::laplace_location;
  if (name == "poisson-rate" || name == "poisson_rate") return FamilyKind::poisson_rate;
  if (name == "linear-regression" || name == "linear_regression") return FamilyKind::linear_regression;
  throw InvalidArgument("unknown model '" + std::string(name) + "'");
}

std::string_view to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::gaussian_location:
      return "gaussian-location";
    case FamilyKind::laplace_location:
      return "laplace-location";
    case FamilyKind::poisson_rate:
      return "poisson-rate";
    case FamilyKind::linear_regression:
      return "linear-regression";
  }
  return "?";
}

LikelihoodFamily::LikelihoodFamily(FamilyKind kind, double scale, Box domain)
    : kind_(kind), scale_(scale), domain_(std::move(domain)) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_))
    throw DomainError("family scale must be positive and finite");
  if (domain_.dim() == 0) throw DomainError("family domain is empty");
}

LikelihoodFamily LikelihoodFamily::gaussian_location(double sigma, Box domain) {
  if (domain.dim() != 1) throw DomainError("gaussian_location has a 1-dimensional parameter");
  return {FamilyKind::gaussian_location, sigma, std::move(domain)};
}

LikelihoodFamily LikelihoodFamily::laplace_location(double scale, Box domain) {
  if (domain.dim() != 1) throw DomainError("laplace_location has a 1-dimensional parameter");
  return {FamilyKind::laplace_location, scale, std::move(domain)};
}

LikelihoodFamily LikelihoodFamily::poisson_rate(Box domain) {
  if (domain.dim() != 1) throw DomainError("poisson_rate has a 1-dimensional parameter");
  if (!(domain.lower[0] > 0.0)) throw DomainError("poisson rate needs a positive lower bound");
  return {FamilyKind::poisson_rate, 1.0, std::move(domain)};
}

LikelihoodFamily LikelihoodFamily::linear_regression(std::size_t covariate_dim, Box domain) {
  if (covariate_dim == 0 || domain.dim() != static_cast<Eigen::Index>(covariate_dim) + 1)
    throw DomainError("linear_regression parameter is (beta, sigma) of length covariate_dim + 1");
  if (!(domain.lower[domain.dim() - 1] > 0.0))
    throw DomainError("regression sigma needs a positive lower bound");
  return {FamilyKind::linear_regression, 1.0, std::move(domain)};
}

LikelihoodFamily LikelihoodFamily::with_domain(Box domain) const {
  LikelihoodFamily f = *this;
  if (domain.dim() != domain_.dim()) throw DomainError("replacement domain changes the dimension");
  if (kind_ == FamilyKind::poisson_rate && !(domain.lower[0] > 0.0))
    throw DomainError("poisson rate needs a positive lower bound");
  if (kind_ == FamilyKind::linear_regression && !(domain.lower[domain.dim() - 1] > 0.0))
    throw DomainError("regression sigma needs a positive lower bound");
  f.domain_ = std::move(domain);
  return f;
}

LikelihoodFamily LikelihoodFamily::with_design_moment(const Dataset& data) const {
  if (kind_ != FamilyKind::linear_regression) return *this;
  if (data.empty()) throw EmptyData("design moment needs at least one row");
  const auto p = static_cast<Eigen::Index>(data.covariate_dim());
  if (p + 1 != dim()) throw InvalidArgument("design width does not match the family");
  Matrix m = Matrix::Zero(p, p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = data[i].covariates;
    Eigen::Map<const Vector> zv(z.data(), p);
    m.noalias() += zv * zv.transpose();
  }
  LikelihoodFamily f = *this;
  f.design_moment_ = m / static_cast<double>(data.size());
  return f;
}

void LikelihoodFamily::check_domain(const Vector& theta) const {
  if (!domain_.contains(theta)) throw DomainError("parameter outside the domain");
}

void LikelihoodFamily::check_observation(const Observation& x) const {
  if (!std::isfinite(x.value)) throw NonFiniteInput("observation is not finite");
  if (kind_ == FamilyKind::poisson_rate && x.value < 0.0)
    throw InvalidArgument("poisson observations must be nonnegative");
  if (kind_ == FamilyKind::linear_regression &&
      static_cast<Eigen::Index>(x.covariates.size()) + 1 != dim())
    throw InvalidArgument("observation covariate length does not match the family");
}

namespace {

double residual(const Vector& theta, const Observation& x) {
  double fit = 0.0;
  for (std::size_t j = 0; j < x.covariates.size(); ++j)
    fit += theta[static_cast<Eigen::Index>(j)] * x.covariates[j];
  return x.value - fit;
}

}  // namespace

double LikelihoodFamily::nll(const Vector& theta, const Observation& x) const {
  check_domain(theta);
  check_observation(x);
  switch (kind_) {
    case FamilyKind::gaussian_location: {
      const double r = (x.value - theta[0]) / scale_;
      return 0.5 * r * r;
    }
    case FamilyKind::laplace_location:
      return std::abs(x.value - theta[0]) / scale_;
    case FamilyKind::poisson_rate:
      return theta[0] - x.value * std::log(theta[0]);
    case FamilyKind::linear_regression: {
      const double sigma = theta[dim() - 1];
      const double r = residual(theta, x) / sigma;
      return 0.5 * r * r + std::log(sigma);
    }
  }
  return 0.0;
}

double LikelihoodFamily::nll_increment(const Vector& theta, const Vector& theta_prime,
                                       const Observation& x) const {
  check_domain(theta);
  check_observation(x);
  switch (kind_) {
    case FamilyKind::gaussian_location: {
      // Factored form avoids cancellation for far-out observations.
      const double a = theta[0];
      const double b = theta_prime[0];
      return (b - a) * (2.0 * x.value - a - b) / (2.0 * scale_ * scale_);
    }
    case FamilyKind::laplace_location:
      return (std::abs(x.value - theta[0]) - std::abs(x.value - theta_prime[0])) / scale_;
    case FamilyKind::poisson_rate:
      return (theta[0] - theta_prime[0]) - x.value * (std::log(theta[0]) - std::log(theta_prime[0]));
    case FamilyKind::linear_regression: {
      const double s = theta[dim() - 1];
      const double sp = theta_prime[dim() - 1];
      const double r = residual(theta, x) / s;
      const double rp = residual(theta_prime, x) / sp;
      return 0.5 * (r - rp) * (r + rp) + std::log(s / sp);
    }
  }
  return 0.0;
}

Vector LikelihoodFamily::grad_nll(const Vector& theta, const Observation& x,
                                  KinkPolicy kink) const {
  check_domain(theta);
  if (kink == KinkPolicy::throw_error && kind_ == FamilyKind::laplace_location &&
      x.value == theta[0])
    throw NonDifferentiablePoint("laplace likelihood is not differentiable at x == theta");
  Vector g = Vector::Zero(dim());
  accumulate_grad_nll(theta, x, 1.0, g);
  return g;
}

void LikelihoodFamily::accumulate_grad_nll(const Vector& theta, const Observation& x,
                                           double weight, Eigen::Ref<Vector> out) const {
  check_observation(x);
  switch (kind_) {
    case FamilyKind::gaussian_location:
      out[0] += weight * (theta[0] - x.value) / (scale_ * scale_);
      return;
    case FamilyKind::laplace_location: {
      const double d = theta[0] - x.value;
      if (d != 0.0) out[0] += weight * (d > 0.0 ? 1.0 : -1.0) / scale_;
      return;
    }
    case FamilyKind::poisson_rate:
      out[0] += weight * (1.0 - x.value / theta[0]);
      return;
    case FamilyKind::linear_regression: {
      const Eigen::Index p = dim() - 1;
      const double sigma = theta[p];
      const double r = residual(theta, x);
      const double inv_var = 1.0 / (sigma * sigma);
      for (Eigen::Index j = 0; j < p; ++j)
        out[j] -= weight * r * x.covariates[static_cast<std::size_t>(j)] * inv_var;
      out[p] += weight * (1.0 / sigma - r * r * inv_var / sigma);
      return;
    }
  }
}

Matrix LikelihoodFamily::fisher_information(const Vector& theta) const {
  check_domain(theta);
  switch (kind_) {
    case FamilyKind::gaussian_location:
    case FamilyKind::laplace_location:
      return Matrix::Constant(1, 1, 1.0 / (scale_ * scale_));
    case FamilyKind::poisson_rate:
      return Matrix::Constant(1, 1, 1.0 / theta[0]);
    case FamilyKind::linear_regression: {
      if (!design_moment_)
        throw InvalidArgument("regression Fisher information needs the design moment");
      const Eigen::Index p = dim() - 1;
      const double sigma = theta[p];
      Matrix info = Matrix::Zero(dim(), dim());
      info.topLeftCorner(p, p) = *design_moment_ / (sigma * sigma);
      info(p, p) = 2.0 / (sigma * sigma);
      return info;
    }
  }
  return {};
}

double LikelihoodFamily::expected_increment(const Vector& theta, const Vector& theta_prime,
                                            const Vector& theta0) const {
  switch (kind_) {
    case FamilyKind::gaussian_location: {
      const double a = theta[0] - theta0[0];
      const double b = theta_prime[0] - theta0[0];
      return (a * a - b * b) / (2.0 * scale_ * scale_);
    }
    case FamilyKind::laplace_location: {
      auto mean_abs = [&](double d) {
        return (std::abs(d) + scale_ * std::exp(-std::abs(d) / scale_)) / scale_;
      };
      return mean_abs(theta[0] - theta0[0]) - mean_abs(theta_prime[0] - theta0[0]);
    }
    case FamilyKind::poisson_rate:
      return (theta[0] - theta_prime[0]) - theta0[0] * (std::log(theta[0]) - std::log(theta_prime[0]));
    case FamilyKind::linear_regression:
      throw InvalidArgument("expected increment needs the covariate law; not available for regression");
  }
  return 0.0;
}

double LikelihoodFamily::simulate(const Vector& theta, std::mt19937_64& rng) const {
  switch (kind_) {
    case FamilyKind::gaussian_location:
      return theta[0] + scale_ * std::normal_distribution<double>(0.0, 1.0)(rng);
    case FamilyKind::laplace_location: {
      std::exponential_distribution<double> e(1.0);
      const double a = e(rng);
      const double b = e(rng);
      return theta[0] + scale_ * (a - b);
    }
    case FamilyKind::poisson_rate:
      return static_cast<double>(std::poisson_distribution<long>(theta[0])(rng));
    case FamilyKind::linear_regression:
      throw InvalidArgument("simulation of regression responses needs covariates");
  }
  return 0.0;
}

Vector closed_form_mle(const LikelihoodFamily& family, const Dataset& data) {
  if (data.empty()) throw EmptyData("closed-form MLE needs at least one observation");
  const auto& v = data.values();
  Vector theta(family.dim());
  switch (family.kind()) {
    case FamilyKind::gaussian_location:
    case FamilyKind::poisson_rate:
      theta[0] = mean(v);
      break;
    case FamilyKind::laplace_location:
      theta[0] = median(v);
      break;
    case FamilyKind::linear_regression: {
      const auto n = static_cast<Eigen::Index>(data.size());
      const auto p = static_cast<Eigen::Index>(data.covariate_dim());
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
          data.covariates().data(), n, p);
      Eigen::Map<const Vector> y(v.data(), n);
      const Vector beta = x.colPivHouseholderQr().solve(y);
      const double rss = (y - x * beta).squaredNorm();
      theta.head(p) = beta;
      theta[p] = std::sqrt(rss / static_cast<double>(n));
      break;
    }
  }
  return family.domain().clamp(theta);
}

Prior::Prior(Box box, std::vector<CoordinatePrior> coords)
    : box_(std::move(box)), coords_(std::move(coords)) {
  if (static_cast<Eigen::Index>(coords_.size()) != box_.dim())
    throw DomainError("prior needs one coordinate specification per parameter");
  for (const auto& c : coords_) {
    if (c.kind == CoordinatePrior::Kind::gaussian &&
        (!(c.sd > 0.0) || !std::isfinite(c.sd) || !std::isfinite(c.mean)))
      throw DomainError("gaussian prior coordinates need a finite mean and positive sd");
  }
}

Prior Prior::uniform_box(Box box) {
  std::vector<CoordinatePrior> coords(static_cast<std::size_t>(box.dim()));
  return {std::move(box), std::move(coords)};
}

Prior Prior::gaussian_diagonal(Box box, const Vector& means, const Vector& sds) {
  if (means.size() != box.dim() || sds.size() != box.dim())
    throw DomainError("gaussian prior means/sds must match the box dimension");
  std::vector<CoordinatePrior> coords;
  for (Eigen::Index i = 0; i < box.dim(); ++i)
    coords.push_back({CoordinatePrior::Kind::gaussian, means[i], sds[i]});
  return {std::move(box), std::move(coords)};
}

Prior Prior::product(Box box, std::vector<CoordinatePrior> coords) {
  return {std::move(box), std::move(coords)};
}

bool Prior::is_uniform() const {
  for (const auto& c : coords_)
    if (c.kind != CoordinatePrior::Kind::uniform) return false;
  return true;
}

double Prior::log_density(const Vector& theta) const {
  if (!box_.contains(theta)) throw DomainError("parameter outside the prior support");
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  double lp = 0.0;
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto& c = coords_[i];
    if (c.kind == CoordinatePrior::Kind::uniform) {
      lp -= std::log(box_.upper[ii] - box_.lower[ii]);
    } else {
      const double u = (theta[ii] - c.mean) / c.sd;
      lp -= 0.5 * u * u + std::log(c.sd) + kLogSqrt2Pi;
    }
  }
  return lp;
}

Vector Prior::grad_log_density(const Vector& theta) const {
  if (!box_.contains(theta)) throw DomainError("parameter outside the prior support");
  Vector g = Vector::Zero(box_.dim());
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    const auto& c = coords_[i];
    if (c.kind == CoordinatePrior::Kind::gaussian) {
      const auto ii = static_cast<Eigen::Index>(i);
      g[ii] = -(theta[ii] - c.mean) / (c.sd * c.sd);
    }
  }
  return g;
}

Vector Prior::default_reference() const {
  Vector t = box_.center();
  for (std::size_t i = 0; i < coords_.size(); ++i)
    if (coords_[i].kind == CoordinatePrior::Kind::gaussian)
      t[static_cast<Eigen::Index>(i)] = coords_[i].mean;
  return t;
}

Vector Prior::sample(std::mt19937_64& rng) const {
  Vector t(box_.dim());
  for (std::size_t i = 0; i < coords_.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto& c = coords_[i];
    if (c.kind == CoordinatePrior::Kind::uniform)
      t[ii] = std::uniform_real_distribution<double>(box_.lower[ii], box_.upper[ii])(rng);
    else
      t[ii] = std::normal_distribution<double>(c.mean, c.sd)(rng);
  }
  return box_.clamp(t);
}

ReferencePoint::ReferencePoint(Vector theta, const Box& domain) : theta_(std::move(theta)) {
  if (!domain.interior(theta_))
    throw DomainError("reference point must lie strictly inside the parameter domain");
}

}  // namespace mombayes
