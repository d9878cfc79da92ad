#include "mombayes/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "mombayes/errors.hpp"

namespace mombayes {

SamplerAlgorithm parse_sampler(std::string_view name) {
  if (name == "rwm") return SamplerAlgorithm::rwm;
  if (name == "hmc") return SamplerAlgorithm::hmc;
  throw InvalidArgument("unknown sampler '" + std::string(name) + "'");
}

std::string_view to_string(SamplerAlgorithm algorithm) {
  return algorithm == SamplerAlgorithm::rwm ? "rwm" : "hmc";
}

double SamplerConfig::effective_target_accept() const {
  if (target_accept > 0.0) return target_accept;
  return algorithm == SamplerAlgorithm::rwm ? 0.234 : 0.8;
}

void SamplerConfig::validate() const {
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (draws < 1) throw ConfigError("draws must be >= 1");
  if (warmup < 1) throw ConfigError("warmup must be >= 1");
  if (target_accept >= 1.0) throw ConfigError("target acceptance must lie in (0, 1)");
  if (algorithm == SamplerAlgorithm::hmc && leapfrog_steps < 1)
    throw ConfigError("leapfrog_steps must be >= 1");
  if (max_step_halvings < 0) throw ConfigError("max_step_halvings must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  // splitmix64 finalizer over (seed, chain).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(chain) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log_density(const LogDensity& target, const Vector& x) {
  if (!target.domain().contains(x)) return kNegInf;
  try {
    const double v = target.log_density(x);
    return std::isnan(v) ? kNegInf : v;
  } catch (const DomainError&) {
    return kNegInf;
  }
}

Vector standard_normal(std::mt19937_64& rng, Eigen::Index d) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z[i] = n01(rng);
  return z;
}

Vector jittered_start(const LogDensity& target, const Vector& init, const Vector& scale,
                      std::mt19937_64& rng) {
  const Box& box = target.domain();
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vector x = box.clamp(init + scale.cwiseProduct(standard_normal(rng, init.size())));
    if (box.interior(x) && std::isfinite(safe_log_density(target, x))) return x;
  }
  return box.clamp(init);
}

// Welford accumulator for per-coordinate variance.
struct RunningMoments {
  long count = 0;
  Vector mean;
  Vector m2;

  void reset(Eigen::Index d) {
    count = 0;
    mean = Vector::Zero(d);
    m2 = Vector::Zero(d);
  }
  void push(const Vector& x) {
    ++count;
    const Vector delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta.cwiseProduct(x - mean);
  }
  Vector variance() const { return m2 / static_cast<double>(std::max<long>(count - 1, 1)); }
};

Chain run_rwm(const LogDensity& target, const SamplerConfig& cfg, int index, const Vector& init,
              const Vector& init_scale) {
  const Eigen::Index d = init.size();
  Chain chain;
  chain.seed = chain_seed(cfg.seed, index);
  std::mt19937_64 rng(chain.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Vector scales = init_scale;
  Vector x = jittered_start(target, init, init_scale, rng);
  double lp = safe_log_density(target, x);
  const double base = std::log(2.38 / std::sqrt(static_cast<double>(d)));
  double log_factor = base;
  const double goal = cfg.effective_target_accept();

  const int collect_begin = cfg.warmup / 4;
  const int collect_end = cfg.warmup / 2;
  RunningMoments moments;
  moments.reset(d);

  chain.draws.resize(cfg.draws, d);
  chain.log_density.resize(cfg.draws);
  long accepted = 0;
  const int total = cfg.warmup + cfg.draws;
  for (int t = 0; t < total; ++t) {
    const Vector prop = x + std::exp(log_factor) * scales.cwiseProduct(standard_normal(rng, d));
    const double lp_prop = safe_log_density(target, prop);
    double alpha = 0.0;
    if (std::isfinite(lp_prop)) alpha = lp_prop >= lp ? 1.0 : std::exp(lp_prop - lp);
    const bool accept = unif(rng) < alpha;
    if (accept) {
      x = prop;
      lp = lp_prop;
    }
    if (t < cfg.warmup) {
      log_factor += (alpha - goal) / std::pow(static_cast<double>(t) + 1.0, 0.6);
      log_factor = std::clamp(log_factor, base - 15.0, base + 15.0);
      if (t >= collect_begin && t < collect_end) moments.push(x);
      if (t == collect_end - 1 && moments.count >= 20) {
        const Vector var = moments.variance();
        for (Eigen::Index i = 0; i < d; ++i)
          if (var[i] > 0.0 && std::isfinite(var[i])) scales[i] = std::sqrt(var[i]);
        log_factor = base;
      }
    } else {
      const int row = t - cfg.warmup;
      chain.draws.row(row) = x.transpose();
      chain.log_density[row] = lp;
      if (accept) ++accepted;
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.draws);
  chain.low_acceptance = chain.acceptance_rate < 0.01;
  chain.step_size = std::exp(log_factor);
  chain.scales = scales;
  return chain;
}

struct Point {
  Vector x;
  double lp = kNegInf;
  Vector grad;
};

bool evaluate(const LogDensity& target, Point& p) {
  if (!target.domain().contains(p.x)) return false;
  try {
    p.lp = target.log_density_and_gradient(p.x, p.grad);
  } catch (const DomainError&) {
    return false;
  }
  return std::isfinite(p.lp) && p.grad.allFinite();
}

// Returns the acceptance probability; `out` holds the proposal when finite.
double leapfrog(const LogDensity& target, const Point& start, const Vector& momentum,
                const Vector& inv_mass, double eps, int steps, Point& out, double& energy_error) {
  Point cur = start;
  Vector p = momentum;
  const double h0 = -start.lp + 0.5 * p.cwiseProduct(inv_mass).dot(p);
  p += 0.5 * eps * cur.grad;
  for (int s = 0; s < steps; ++s) {
    cur.x += eps * inv_mass.cwiseProduct(p);
    if (!evaluate(target, cur)) {
      energy_error = std::numeric_limits<double>::infinity();
      return 0.0;
    }
    p += (s + 1 == steps ? 0.5 : 1.0) * eps * cur.grad;
  }
  const double h1 = -cur.lp + 0.5 * p.cwiseProduct(inv_mass).dot(p);
  energy_error = h1 - h0;
  out = std::move(cur);
  if (!std::isfinite(energy_error)) return 0.0;
  return energy_error <= 0.0 ? 1.0 : std::exp(-energy_error);
}

double initial_step(const LogDensity& target, const Point& start, const Vector& inv_mass,
                    int max_halvings, std::mt19937_64& rng) {
  double eps = 1.0;
  Point out;
  double err = 0.0;
  const Vector mass_sd = inv_mass.cwiseInverse().cwiseSqrt();
  auto prob = [&](double e) {
    const Vector p = mass_sd.cwiseProduct(standard_normal(rng, start.x.size()));
    return leapfrog(target, start, p, inv_mass, e, 1, out, err);
  };
  double a = prob(eps);
  const bool grow = a > 0.5;
  for (int i = 0; i < max_halvings; ++i) {
    if (grow ? a <= 0.5 : a > 0.5) break;
    eps = grow ? eps * 2.0 : eps * 0.5;
    a = prob(eps);
  }
  return eps;
}

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  long m = 0;
  double delta = 0.8;

  void restart(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    h_bar = 0.0;
    m = 0;
  }
  void update(double accept_prob) {
    constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
    ++m;
    const double md = static_cast<double>(m);
    const double w = 1.0 / (md + t0);
    h_bar = (1.0 - w) * h_bar + w * (delta - accept_prob);
    log_eps = mu - std::sqrt(md) / gamma * h_bar;
    const double eta = std::pow(md, -kappa);
    log_eps_bar = eta * log_eps + (1.0 - eta) * log_eps_bar;
  }
};

Chain run_hmc(const LogDensity& target, const SamplerConfig& cfg, int index, const Vector& init,
              const Vector& init_scale) {
  const Eigen::Index d = init.size();
  Chain chain;
  chain.seed = chain_seed(cfg.seed, index);
  std::mt19937_64 rng(chain.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Vector inv_mass = init_scale.cwiseProduct(init_scale);
  Point cur;
  cur.x = jittered_start(target, init, init_scale, rng);
  if (!evaluate(target, cur)) {
    cur.x = target.domain().clamp(init);
    if (!evaluate(target, cur)) throw DomainError("HMC start has no finite log density/gradient");
  }

  DualAveraging da;
  da.delta = cfg.effective_target_accept();
  double eps = initial_step(target, cur, inv_mass, cfg.max_step_halvings, rng);
  da.restart(eps);

  // Stan-style windows: fast / slow (mass matrix) / fast.
  const int init_buffer = cfg.warmup * 15 / 100;
  const int term_buffer = cfg.warmup / 10;
  const int slow_end = cfg.warmup - term_buffer;
  const bool adapt_mass = slow_end - init_buffer >= 20;
  RunningMoments moments;
  moments.reset(d);

  chain.draws.resize(cfg.draws, d);
  chain.log_density.resize(cfg.draws);
  long accepted = 0;
  const int total = cfg.warmup + cfg.draws;
  for (int t = 0; t < total; ++t) {
    const bool warm = t < cfg.warmup;
    double step = eps;
    if (!warm) step *= 0.9 + 0.2 * unif(rng);
    // Random path length; a fixed one can resonate with the target's period.
    const int half = std::max(1, cfg.leapfrog_steps / 2);
    const int steps = half + static_cast<int>(unif(rng) * (cfg.leapfrog_steps - half + 1));
    const Vector momentum = inv_mass.cwiseInverse().cwiseSqrt().cwiseProduct(standard_normal(rng, d));
    Point prop;
    double energy_error = 0.0;
    const double alpha =
        leapfrog(target, cur, momentum, inv_mass, step, std::min(steps, cfg.leapfrog_steps), prop, energy_error);
    const bool divergent = energy_error > 1000.0;
    const bool accept = !divergent && alpha > 0.0 && unif(rng) < alpha;
    if (accept) cur = std::move(prop);

    if (warm) {
      da.update(divergent ? 0.0 : alpha);
      eps = std::exp(da.log_eps);
      if (adapt_mass && t >= init_buffer && t < slow_end) moments.push(cur.x);
      if (adapt_mass && t == slow_end - 1) {
        const double n = static_cast<double>(moments.count);
        const Vector var = moments.variance();
        for (Eigen::Index i = 0; i < d; ++i) {
          const double v = (n / (n + 5.0)) * var[i] + 1e-3 * (5.0 / (n + 5.0)) * inv_mass[i];
          if (v > 0.0 && std::isfinite(v)) inv_mass[i] = v;
        }
        eps = initial_step(target, cur, inv_mass, cfg.max_step_halvings, rng);
        da.restart(eps);
      }
      if (t == cfg.warmup - 1) eps = std::exp(da.log_eps_bar);
    } else {
      const int row = t - cfg.warmup;
      chain.draws.row(row) = cur.x.transpose();
      chain.log_density[row] = cur.lp;
      if (accept) ++accepted;
      if (divergent) ++chain.divergences;
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(cfg.draws);
  chain.low_acceptance = chain.acceptance_rate < 0.01;
  chain.step_size = eps;
  chain.scales = inv_mass.cwiseSqrt();
  return chain;
}

}  // namespace

Vector laplace_scales(const LogDensity& target, const Vector& theta) {
  const Box& box = target.domain();
  const Eigen::Index d = theta.size();
  Vector scales = 0.01 * box.width();
  const double f0 = safe_log_density(target, theta);
  if (!std::isfinite(f0)) return scales;
  for (Eigen::Index i = 0; i < d; ++i) {
    double h = 1e-3 * box.width()[i];
    for (int pass = 0; pass < 3; ++pass) {
      const double room = std::min(theta[i] - box.lower[i], box.upper[i] - theta[i]);
      const double step = std::min(h, 0.5 * room);
      if (!(step > 0.0)) break;
      Vector up = theta, down = theta;
      up[i] += step;
      down[i] -= step;
      const double curv = (safe_log_density(target, up) - 2.0 * f0 + safe_log_density(target, down)) /
                          (step * step);
      if (!(curv < 0.0) || !std::isfinite(curv)) break;
      scales[i] = 1.0 / std::sqrt(-curv);
      h = scales[i];
    }
  }
  return scales;
}

std::vector<Chain> sample(const LogDensity& target, const SamplerConfig& config, const Vector& init,
                          const Vector& init_scale) {
  config.validate();
  if (init.size() != target.dim() || init_scale.size() != target.dim())
    throw ConfigError("initial point and scales must match the target dimension");
  if (!(init_scale.array() > 0.0).all() || !init_scale.allFinite())
    throw ConfigError("initial scales must be positive and finite");
  if (config.algorithm == SamplerAlgorithm::hmc && !target.differentiable())
    throw ConfigError("hmc needs a differentiable target; use rwm for the absolute loss");

  std::vector<Chain> chains(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(chains.size());
  auto work = [&](int c) {
    try {
      chains[static_cast<std::size_t>(c)] =
          config.algorithm == SamplerAlgorithm::rwm ? run_rwm(target, config, c, init, init_scale)
                                                    : run_hmc(target, config, c, init, init_scale);
    } catch (...) {
      errors[static_cast<std::size_t>(c)] = std::current_exception();
    }
  };
  int threads = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  threads = std::min(threads, config.chains);
  if (threads <= 1) {
    for (int c = 0; c < config.chains; ++c) work(c);
  } else {
    for (int first = 0; first < config.chains; first += threads) {
      std::vector<std::jthread> pool;
      for (int c = first; c < std::min(first + threads, config.chains); ++c) pool.emplace_back(work, c);
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return chains;
}

std::vector<Chain> sample(const RobustPosterior& post, const SamplerConfig& config) {
  const MapResult map = map_estimate(post, 2, config.seed);
  return sample(post, config, map.theta, laplace_scales(post, map.theta));
}

}  // namespace mombayes
