#include "mombayes/mom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "mombayes/errors.hpp"
#include "mombayes/stats.hpp"

namespace mombayes {

PartitionScheme parse_partition_scheme(std::string_view name) {
  if (name == "contiguous") return PartitionScheme::contiguous;
  if (name == "shuffled") return PartitionScheme::shuffled;
  throw InvalidArgument("unknown partition scheme '" + std::string(name) + "'");
}

BlockPartition partition_blocks(std::size_t N, int k, PartitionScheme scheme, std::uint64_t seed) {
  if (k < 1 || static_cast<std::size_t>(k) > N / 2)
    throw InvalidK("number of blocks k=" + std::to_string(k) + " must satisfy 1 <= k <= N/2 (N=" +
                   std::to_string(N) + ")");
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (scheme == PartitionScheme::shuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  BlockPartition p;
  p.k = k;
  p.n = static_cast<int>(N / static_cast<std::size_t>(k));
  p.blocks.resize(static_cast<std::size_t>(k));
  const auto n = static_cast<std::size_t>(p.n);
  for (std::size_t j = 0; j < p.blocks.size(); ++j)
    p.blocks[j].assign(order.begin() + static_cast<std::ptrdiff_t>(j * n),
                       order.begin() + static_cast<std::ptrdiff_t>((j + 1) * n));
  return p;
}

double ScaleSchedule::delta(int n) const {
  return std::max(floor, c * std::pow(static_cast<double>(n), exponent));
}

void ScaleSchedule::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("scale constant c must be positive");
  if (!(exponent > 0.0 && exponent < 0.5))
    throw InvalidArgument("scale exponent must lie in (0, 1/2)");
  if (!(floor > 0.0)) throw InvalidArgument("scale floor must be positive");
}

std::vector<double> block_averages(const LikelihoodFamily& family, const Vector& theta,
                                   const Vector& theta_prime, const Dataset& data,
                                   const BlockPartition& partition) {
  family.check_domain(theta);
  std::vector<double> avgs(partition.blocks.size());
  const double inv_n = 1.0 / static_cast<double>(partition.n);
  for (std::size_t j = 0; j < partition.blocks.size(); ++j) {
    double s = 0.0;
    for (std::size_t i : partition.blocks[j]) s += family.nll_increment(theta, theta_prime, data[i]);
    avgs[j] = s * inv_n;
  }
  return avgs;
}

namespace {

struct Score {
  double value;
  double slope_weight;  // sum of rho''
};

Score score(std::span<const double> avgs, const Rho& rho, double s, double z) {
  Score out{0.0, 0.0};
  for (double a : avgs) {
    const double u = s * (a - z);
    out.value += rho.deriv1(u);
    out.slope_weight += rho.deriv2(u);
  }
  return out;
}

double flat_share(std::span<const double> avgs, const Rho& rho, double s, double z) {
  std::size_t flat = 0;
  for (double a : avgs)
    if (rho.deriv2(s * (a - z)) == 0.0) ++flat;
  return static_cast<double>(flat) / static_cast<double>(avgs.size());
}

}  // namespace

MomEstimate solve_mom(std::span<const double> averages, const Rho& rho, int n,
                      const ScaleSchedule& schedule) {
  if (averages.empty()) throw NonFiniteInput("no block averages to aggregate");
  for (double a : averages)
    if (!std::isfinite(a)) throw NonFiniteInput("block average is not finite");
  if (n < 1) throw InvalidArgument("block size must be positive");

  MomEstimate est;
  if (rho.kind() == RhoKind::absolute) {
    est.value = median(averages);
    std::size_t off = 0;
    for (double a : averages)
      if (a != est.value) ++off;
    est.flat_fraction = static_cast<double>(off) / static_cast<double>(averages.size());
    return est;
  }

  // Fixed summation order: the result does not depend on block order.
  std::vector<double> sorted(averages.begin(), averages.end());
  std::sort(sorted.begin(), sorted.end());
  averages = sorted;
  double lo = sorted.front();
  double hi = sorted.back();
  const double s = std::sqrt(static_cast<double>(n)) / schedule.delta(n);
  if (lo == hi) {
    est.value = lo;
    est.flat_fraction = flat_share(averages, rho, s, lo);
    return est;
  }

  const double tol =
      std::max(1e-12, 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lo), std::abs(hi)));
  double z = std::clamp(mean(averages), lo, hi);
  bool flat = false;
  int it = 0;
  for (; it < 500; ++it) {
    const Score sc = score(averages, rho, s, z);
    if (sc.value == 0.0) {
      flat = sc.slope_weight == 0.0;
      break;
    }
    if (sc.value > 0.0)
      lo = z;
    else
      hi = z;
    if (hi - lo <= tol) {
      z = 0.5 * (lo + hi);
      break;
    }
    double next = 0.5 * (lo + hi);
    if (sc.slope_weight > 0.0) {
      const double newton = z + sc.value / (s * sc.slope_weight);
      if (newton > lo && newton < hi) next = newton;
    }
    if (std::abs(next - z) <= tol) {
      z = next;
      break;
    }
    z = next;
  }

  if (flat) {
    // Score vanishes on an interval; locate both ends and take the midpoint.
    double a = lo, b = z;
    for (int i = 0; i < 200 && b - a > tol; ++i) {
      const double m = 0.5 * (a + b);
      (score(averages, rho, s, m).value > 0.0 ? a : b) = m;
    }
    const double left = b;
    a = z;
    b = hi;
    for (int i = 0; i < 200 && b - a > tol; ++i) {
      const double m = 0.5 * (a + b);
      (score(averages, rho, s, m).value < 0.0 ? b : a) = m;
    }
    const double right = a;
    z = 0.5 * (left + right);
    lo = left;
    hi = right;
  }

  est.value = z;
  est.iterations = it + 1;
  est.bracket_width = hi - lo;
  est.flat_fraction = flat_share(averages, rho, s, z);
  return est;
}

MomEstimate mom_increment(const LikelihoodFamily& family, const Vector& theta,
                          const Vector& theta_prime, const Dataset& data,
                          const BlockPartition& partition, const Rho& rho,
                          const ScaleSchedule& schedule) {
  const auto avgs = block_averages(family, theta, theta_prime, data, partition);
  return solve_mom(avgs, rho, partition.n, schedule);
}

Vector grad_mom(const LikelihoodFamily& family, const Vector& theta, const Vector& theta_prime,
                const Dataset& data, const BlockPartition& partition, const Rho& rho,
                const ScaleSchedule& schedule, const MomEstimate& estimate) {
  if (!rho.differentiable())
    throw UnsupportedLoss("the implicit gradient needs a differentiable rho");
  const auto avgs = block_averages(family, theta, theta_prime, data, partition);
  return grad_mom_from_averages(family, theta, data, partition, rho, schedule, avgs,
                                estimate.value);
}

Vector grad_mom_from_averages(const LikelihoodFamily& family, const Vector& theta,
                              const Dataset& data, const BlockPartition& partition,
                              const Rho& rho, const ScaleSchedule& schedule,
                              std::span<const double> averages, double value) {
  if (!rho.differentiable())
    throw UnsupportedLoss("the implicit gradient needs a differentiable rho");
  const double s = std::sqrt(static_cast<double>(partition.n)) / schedule.delta(partition.n);
  const double inv_n = 1.0 / static_cast<double>(partition.n);
  Vector g = Vector::Zero(family.dim());
  double total = 0.0;
  for (std::size_t j = 0; j < averages.size(); ++j) {
    const double w = rho.deriv2(s * (averages[j] - value));
    if (w == 0.0) continue;
    total += w;
    for (std::size_t i : partition.blocks[j]) family.accumulate_grad_nll(theta, data[i], w * inv_n, g);
  }
  if (total == 0.0) throw FlatScore("every block is saturated; the MOM gradient is undefined");
  return g / total;
}

Vector blockwise_median_mle(const LikelihoodFamily& family, const Dataset& data,
                            const BlockPartition& partition) {
  const bool fits = family.kind() != FamilyKind::linear_regression ||
                    partition.n > static_cast<int>(family.dim());
  if (!fits) return closed_form_mle(family, data);
  std::vector<Vector> fits_per_block;
  fits_per_block.reserve(partition.blocks.size());
  for (const auto& block : partition.blocks)
    fits_per_block.push_back(closed_form_mle(family, data.subset(block)));
  Vector pilot(family.dim());
  std::vector<double> coord(fits_per_block.size());
  for (Eigen::Index d = 0; d < family.dim(); ++d) {
    for (std::size_t j = 0; j < fits_per_block.size(); ++j) coord[j] = fits_per_block[j][d];
    pilot[d] = median(coord);
  }
  return family.domain().clamp(pilot);
}

ScaleSchedule calibrate_schedule(const LikelihoodFamily& family, const Vector& theta_prime,
                                 const Dataset& data, const BlockPartition& partition,
                                 double exponent, double floor) {
  const Vector pilot = blockwise_median_mle(family, data, partition);
  auto avgs = block_averages(family, pilot, theta_prime, data, partition);
  const double root_n = std::sqrt(static_cast<double>(partition.n));
  for (double& a : avgs) a *= root_n;
  ScaleSchedule schedule;
  schedule.exponent = exponent;
  schedule.floor = floor;
  schedule.c = std::max(1.4826 * median_absolute_deviation(avgs), floor);
  return schedule;
}

}  // namespace mombayes
