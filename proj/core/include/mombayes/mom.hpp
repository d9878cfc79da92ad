#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mombayes/models.hpp"
#include "mombayes/rho.hpp"

namespace mombayes {

enum class PartitionScheme { contiguous, shuffled };

PartitionScheme parse_partition_scheme(std::string_view name);

/// k disjoint blocks of n indices each; the N - k*n remainder is unused.
struct BlockPartition {
  int k = 0;
  int n = 0;
  std::vector<std::vector<std::size_t>> blocks;

  std::size_t effective_size() const {
    return static_cast<std::size_t>(k) * static_cast<std::size_t>(n);
  }
};

/// Requires 1 <= k <= N/2. The shuffled scheme permutes 0..N-1 with a seeded
/// generator before cutting consecutive blocks.
BlockPartition partition_blocks(std::size_t N, int k, PartitionScheme scheme, std::uint64_t seed);

/// Delta_n = max(floor, c * n^exponent).
struct ScaleSchedule {
  double c = 1.0;
  double exponent = 0.25;
  double floor = 1e-8;

  double delta(int n) const;
  void validate() const;
};

struct MomEstimate {
  double value = 0.0;
  int iterations = 0;
  double bracket_width = 0.0;
  /// Share of blocks whose standardized residual lies where rho'' == 0.
  double flat_fraction = 0.0;
};

/// Entry j: mean over block j of l(theta, X_i) - l(theta', X_i).
std::vector<double> block_averages(const LikelihoodFamily& family, const Vector& theta,
                                   const Vector& theta_prime, const Dataset& data,
                                   const BlockPartition& partition);

/**
 * Solves sum_j rho'(sqrt(n) (avg_j - z) / Delta_n) = 0 for z.
 *
 * The score is nonincreasing in z, so the root is bracketed by
 * [min avg, max avg]. A safeguarded Newton iteration keeps that bracket and
 * bisects whenever the Newton step leaves it or the slope vanishes. When the
 * score is zero on a whole interval (every residual saturated) the interval
 * midpoint is returned. The absolute loss reduces to the sample median.
 */
MomEstimate solve_mom(std::span<const double> averages, const Rho& rho, int n,
                      const ScaleSchedule& schedule);

MomEstimate mom_increment(const LikelihoodFamily& family, const Vector& theta,
                          const Vector& theta_prime, const Dataset& data,
                          const BlockPartition& partition, const Rho& rho,
                          const ScaleSchedule& schedule);

/**
 * Implicit-function gradient of the MOM estimate:
 *   sum_j rho''(u_j) dAvg_j/dtheta / sum_j rho''(u_j),  u_j = sqrt(n)(avg_j - value)/Delta_n.
 * Throws FlatScore when every weight vanishes and UnsupportedLoss for the
 * absolute loss.
 */
Vector grad_mom(const LikelihoodFamily& family, const Vector& theta, const Vector& theta_prime,
                const Dataset& data, const BlockPartition& partition, const Rho& rho,
                const ScaleSchedule& schedule, const MomEstimate& estimate);

/// grad_mom with the block averages already at hand.
Vector grad_mom_from_averages(const LikelihoodFamily& family, const Vector& theta,
                              const Dataset& data, const BlockPartition& partition,
                              const Rho& rho, const ScaleSchedule& schedule,
                              std::span<const double> averages, double value);

/**
 * Data-driven Delta_n constant: c = 1.4826 * MAD_j(sqrt(n) * avg_j(pilot)),
 * i.e. a robust per-observation scale of the increments, where the pilot is
 * the coordinatewise median of blockwise closed-form MLEs (falls back to the
 * full-sample MLE when blocks are too small to fit).
 */
ScaleSchedule calibrate_schedule(const LikelihoodFamily& family, const Vector& theta_prime,
                                 const Dataset& data, const BlockPartition& partition,
                                 double exponent = 0.25, double floor = 1e-8);

/// Coordinatewise median of closed-form MLEs over the blocks.
Vector blockwise_median_mle(const LikelihoodFamily& family, const Dataset& data,
                            const BlockPartition& partition);

}  // namespace mombayes
