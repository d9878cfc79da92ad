#include "mombayes/posterior.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "mombayes/errors.hpp"

namespace mombayes {

RobustPosterior::RobustPosterior(LikelihoodFamily family, Prior prior, ReferencePoint theta_prime,
                                 Dataset data, BlockPartition partition, Rho rho,
                                 ScaleSchedule schedule)
    : family_(std::move(family)),
      prior_(std::move(prior)),
      theta_prime_(std::move(theta_prime)),
      data_(std::move(data)),
      partition_(std::move(partition)),
      rho_(std::move(rho)),
      schedule_(schedule) {
  schedule_.validate();
  if (prior_.box().dim() != family_.dim())
    throw DomainError("prior and family dimensions differ");
  if (!family_.domain().interior(theta_prime_.theta()))
    throw DomainError("reference point must lie strictly inside the family domain");
  if (partition_.k < 1 || partition_.n < 1 || partition_.effective_size() > data_.size())
    throw InvalidK("block partition does not fit the dataset");
  for (const auto& block : partition_.blocks)
    for (std::size_t i : block)
      if (i >= data_.size()) throw InvalidK("block index outside the dataset");
  // Normalizability: the kernel must be finite (bounded above on the compact box).
  if (!std::isfinite(log_kernel(theta_prime_.theta())))
    throw DomainError("robust posterior kernel is not finite at the reference point");
}

MomEstimate RobustPosterior::estimate(const Vector& theta) const {
  return mom_increment(family_, theta, theta_prime_.theta(), data_, partition_, rho_, schedule_);
}

double RobustPosterior::log_kernel(const Vector& theta) const {
  family_.check_domain(theta);
  return -effective_size() * estimate(theta).value + prior_.log_density(theta);
}

Vector RobustPosterior::grad_log_kernel(const Vector& theta) const {
  Vector g;
  log_density_and_gradient(theta, g);
  return g;
}

double RobustPosterior::log_density_and_gradient(const Vector& theta, Vector& grad) const {
  family_.check_domain(theta);
  if (!rho_.differentiable())
    throw UnsupportedLoss("gradient of the robust posterior needs a differentiable rho");
  const auto avgs = block_averages(family_, theta, theta_prime_.theta(), data_, partition_);
  const MomEstimate est = solve_mom(avgs, rho_, partition_.n, schedule_);
  const double value = -effective_size() * est.value + prior_.log_density(theta);
  try {
    grad = -effective_size() *
               grad_mom_from_averages(family_, theta, data_, partition_, rho_, schedule_, avgs,
                                      est.value) +
           prior_.grad_log_density(theta);
  } catch (const FlatScore&) {
    grad = finite_difference_gradient(theta);
  }
  return value;
}

Vector RobustPosterior::finite_difference_gradient(const Vector& theta) const {
  const Box& box = family_.domain();
  Vector g(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = 1e-5 * (1.0 + std::abs(theta[i]));
    Vector up = theta, down = theta;
    up[i] = std::min(theta[i] + h, box.upper[i]);
    down[i] = std::max(theta[i] - h, box.lower[i]);
    g[i] = (log_kernel(up) - log_kernel(down)) / (up[i] - down[i]);
  }
  return g;
}

StandardPosterior::StandardPosterior(LikelihoodFamily family, Prior prior,
                                     ReferencePoint theta_prime, Dataset data)
    : family_(std::move(family)),
      prior_(std::move(prior)),
      theta_prime_(std::move(theta_prime)),
      data_(std::move(data)) {
  if (data_.empty()) throw EmptyData("standard posterior needs data");
  if (prior_.box().dim() != family_.dim()) throw DomainError("prior and family dimensions differ");
}

double StandardPosterior::log_density(const Vector& theta) const {
  family_.check_domain(theta);
  double s = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i)
    s += family_.nll_increment(theta, theta_prime_.theta(), data_[i]);
  return -s + prior_.log_density(theta);
}

Vector StandardPosterior::gradient(const Vector& theta) const {
  family_.check_domain(theta);
  Vector g = Vector::Zero(family_.dim());
  for (std::size_t i = 0; i < data_.size(); ++i) family_.accumulate_grad_nll(theta, data_[i], -1.0, g);
  return g + prior_.grad_log_density(theta);
}

ConjugateNormal conjugate_normal_posterior(std::span<const double> data, double sigma,
                                           double prior_mean, double prior_sd) {
  if (data.empty()) throw EmptyData("conjugate posterior needs data");
  double sum = 0.0;
  for (double x : data) sum += x;
  const double precision = static_cast<double>(data.size()) / (sigma * sigma) + 1.0 / (prior_sd * prior_sd);
  const double mean = (sum / (sigma * sigma) + prior_mean / (prior_sd * prior_sd)) / precision;
  return {mean, 1.0 / std::sqrt(precision)};
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_value(const LogDensity& target, const Vector& x) {
  try {
    const double v = target.log_density(x);
    return std::isfinite(v) ? v : -kInf;
  } catch (const DomainError&) {
    return -kInf;
  }
}

// Gradient components that would push a pinned coordinate outside the box are zeroed.
Vector projected(const Box& box, const Vector& x, const Vector& grad) {
  Vector pg = grad;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= box.lower[i] && grad[i] < 0.0) || (x[i] >= box.upper[i] && grad[i] > 0.0))
      pg[i] = 0.0;
  }
  return pg;
}

MapResult ascend_quasi_newton(const LogDensity& target, const Vector& start,
                              const MapOptions& opt) {
  const Box& box = target.domain();
  const Eigen::Index d = start.size();
  MapResult res;
  Vector x = box.clamp(start);
  Vector g;
  double f = target.log_density_and_gradient(x, g);
  const double f_start = f;
  Matrix inv_h = Matrix::Identity(d, d);
  bool scaled = false;
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    Vector pg = projected(box, x, g);
    if (pg.norm() <= opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Vector dir = inv_h * pg;
    for (Eigen::Index i = 0; i < d; ++i)
      if (pg[i] == 0.0) dir[i] = 0.0;
    if (dir.dot(pg) <= 0.0) {
      inv_h.setIdentity();
      scaled = false;
      dir = pg;
    }
    if (!scaled) {
      // First step of unit length in parameter space at most.
      const double len = dir.norm();
      const double cap = 0.1 * box.width().minCoeff();
      if (len > cap) dir *= cap / len;
    }
    double t = 1.0;
    Vector xn;
    double fn = -kInf;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = box.clamp(x + t * dir);
      fn = safe_value(target, xn);
      if (std::isfinite(fn) && fn >= f + 1e-4 * g.dot(xn - x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    Vector gn;
    fn = target.log_density_and_gradient(xn, gn);
    const Vector s = xn - x;
    const Vector y = g - gn;  // curvature of -f
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        inv_h = Matrix::Identity(d, d) * (sy / y.squaredNorm());
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Matrix i_rsy = Matrix::Identity(d, d) - rho * s * y.transpose();
      inv_h = i_rsy * inv_h * i_rsy.transpose() + rho * s * s.transpose();
    }
    const double change = fn - f;
    x = xn;
    f = fn;
    g = gn;
    if (change <= opt.value_tolerance * (1.0 + std::abs(f)) && s.norm() <= 1e-14 * (1.0 + x.norm())) {
      break;
    }
  }
  res.theta = x;
  res.log_density = f;
  res.gradient_norm = projected(box, x, g).norm();
  res.converged = res.converged || res.gradient_norm <= opt.gradient_tolerance;
  res.iterations = it;
  res.improved = f > f_start || res.converged;
  return res;
}

MapResult ascend_compass(const LogDensity& target, const Vector& start, const MapOptions& opt) {
  const Box& box = target.domain();
  MapResult res;
  Vector x = box.clamp(start);
  double f = safe_value(target, x);
  const double f_start = f;
  Vector step = 0.05 * box.width();
  int it = 0;
  const int max_polls = opt.max_iterations * 20;
  for (; it < max_polls; ++it) {
    bool moved = false;
    for (Eigen::Index i = 0; i < x.size() && !moved; ++i) {
      for (double sign : {1.0, -1.0}) {
        Vector trial = x;
        trial[i] = std::clamp(x[i] + sign * step[i], box.lower[i], box.upper[i]);
        if (trial[i] == x[i]) continue;
        const double ft = safe_value(target, trial);
        if (ft > f) {
          x = trial;
          f = ft;
          moved = true;
          break;
        }
      }
    }
    if (!moved) {
      step *= 0.5;
      if ((step.array() <= 1e-10 * (1.0 + x.array().abs())).all()) {
        res.converged = true;
        break;
      }
    }
  }
  res.theta = x;
  res.log_density = f;
  res.iterations = it;
  res.improved = f > f_start || res.converged;
  return res;
}

}  // namespace

MapResult maximize(const LogDensity& target, std::span<const Vector> starts,
                   const MapOptions& options) {
  if (starts.empty()) throw InvalidArgument("maximize needs at least one start");
  MapResult best;
  best.log_density = -kInf;
  bool any_improved = false;
  for (const Vector& s : starts) {
    MapResult r;
    if (!std::isfinite(safe_value(target, target.domain().clamp(s)))) continue;
    r = target.differentiable() ? ascend_quasi_newton(target, s, options)
                                : ascend_compass(target, s, options);
    any_improved = any_improved || r.improved;
    if (r.log_density > best.log_density) best = r;
  }
  if (!std::isfinite(best.log_density))
    throw DomainError("no start point has a finite log density");
  best.improved = any_improved;
  return best;
}

MapResult map_estimate(const RobustPosterior& post, int restarts, std::uint64_t seed) {
  if (restarts < 1) throw InvalidArgument("map_estimate needs restarts >= 1");
  std::vector<Vector> starts;
  starts.push_back(closed_form_mle(post.family(), post.data()));
  starts.push_back(blockwise_median_mle(post.family(), post.data(), post.partition()));
  std::mt19937_64 rng(seed);
  for (int r = 0; r < restarts; ++r) starts.push_back(post.prior().sample(rng));
  MapOptions opt;
  opt.gradient_tolerance = 1e-8 * post.effective_size();
  return maximize(post, starts, opt);
}

}  // namespace mombayes
