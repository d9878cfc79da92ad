#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mombayes/posterior.hpp"

namespace mombayes {

enum class SamplerAlgorithm { rwm, hmc };

SamplerAlgorithm parse_sampler(std::string_view name);
std::string_view to_string(SamplerAlgorithm algorithm);

struct SamplerConfig {
  SamplerAlgorithm algorithm = SamplerAlgorithm::rwm;
  int chains = 4;
  int draws = 5000;
  int warmup = 2000;
  std::uint64_t seed = 1;
  /// Non-positive selects the per-algorithm default (0.234 rwm, 0.8 hmc).
  double target_accept = 0.0;
  int leapfrog_steps = 32;
  /// Bound on halvings in the initial HMC step-size search.
  int max_step_halvings = 30;
  /// Worker threads for the chains; 0 picks hardware concurrency.
  int threads = 0;

  double effective_target_accept() const;
  void validate() const;
};

struct Chain {
  Matrix draws;            // draws x dim
  Vector log_density;      // per retained draw
  double acceptance_rate = 0.0;
  std::uint64_t seed = 0;
  int divergences = 0;     // hmc: energy error above 1000
  bool low_acceptance = false;  // post-warmup acceptance < 1%
  double step_size = 0.0;  // hmc step or rwm global proposal factor
  Vector scales;           // per-coordinate proposal scale / sqrt(inverse mass)
};

/// Per-chain seed derived from the run seed.
std::uint64_t chain_seed(std::uint64_t seed, int chain);

/// Marginal scales from the diagonal of a finite-difference Hessian at `theta`
/// (1 / sqrt(-H_ii)); coordinates with nonnegative curvature fall back to 1% of the box width.
Vector laplace_scales(const LogDensity& target, const Vector& theta);

/**
 * Draws `config.chains` independent chains.
 *
 * rwm: Gaussian random-walk proposals; the global factor is adapted by
 * Robbins-Monro toward the target acceptance during warmup and the
 * per-coordinate scales are reset once from the first half of warmup.
 * hmc: fixed-length leapfrog trajectories, dual-averaging step size and a
 * diagonal mass matrix estimated in a slow warmup window.
 * Proposals leaving the box are rejected. Chains start from `init` jittered by
 * `init_scale`; each chain owns its generator, so results do not depend on
 * thread scheduling.
 */
std::vector<Chain> sample(const LogDensity& target, const SamplerConfig& config, const Vector& init,
                          const Vector& init_scale);

/// Robust-posterior convenience: starts at the MAP with Laplace scales.
std::vector<Chain> sample(const RobustPosterior& post, const SamplerConfig& config);

}  // namespace mombayes
