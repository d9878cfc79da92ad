#include "mombayes/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "mombayes/errors.hpp"
#include "mombayes/stats.hpp"

namespace mombayes {

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < count && !failed; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            failed = true;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

std::vector<double> pooled_column(const std::vector<Chain>& chains, Eigen::Index coord) {
  std::vector<double> out;
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.draws.rows(); ++r) out.push_back(c.draws(r, coord));
  return out;
}

std::vector<double> column(const Chain& c, Eigen::Index coord, Eigen::Index begin, Eigen::Index end) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(end - begin));
  for (Eigen::Index r = begin; r < end; ++r) out.push_back(c.draws(r, coord));
  return out;
}

}  // namespace

double split_rhat(const std::vector<Chain>& chains, Eigen::Index coord) {
  std::vector<double> means, vars;
  Eigen::Index len = std::numeric_limits<Eigen::Index>::max();
  for (const auto& c : chains) len = std::min(len, c.draws.rows() / 2);
  if (chains.empty() || len < 2) return std::numeric_limits<double>::quiet_NaN();
  for (const auto& c : chains) {
    for (int half = 0; half < 2; ++half) {
      const auto x = column(c, coord, half * len, (half + 1) * len);
      means.push_back(mean(x));
      vars.push_back(variance(x));
    }
  }
  const double L = static_cast<double>(len);
  const double W = mean(vars);
  const double B = L * variance(means);
  if (W == 0.0) return B == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(((L - 1.0) / L * W + B / L) / W);
}

double batch_means_ess(const std::vector<Chain>& chains, Eigen::Index coord) {
  double total = 0.0;
  for (const auto& c : chains) {
    const Eigen::Index n = c.draws.rows();
    if (n == 0) continue;
    const auto x = column(c, coord, 0, n);
    const double var = variance(x);
    const auto b = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::sqrt(static_cast<double>(n))));
    const Eigen::Index batches = n / b;
    if (var == 0.0 || batches < 2) {
      total += static_cast<double>(n);
      continue;
    }
    std::vector<double> bm(static_cast<std::size_t>(batches));
    for (Eigen::Index j = 0; j < batches; ++j) {
      double s = 0.0;
      for (Eigen::Index r = j * b; r < (j + 1) * b; ++r) s += x[static_cast<std::size_t>(r)];
      bm[static_cast<std::size_t>(j)] = s / static_cast<double>(b);
    }
    const double sigma2 = static_cast<double>(b) * variance(bm);
    total += sigma2 > 0.0 ? static_cast<double>(n) * var / sigma2 : static_cast<double>(n);
  }
  return std::max(total, 1.0);
}

PosteriorSummary summarize(const std::vector<Chain>& chains, double alpha, const LogDensity* refine) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  std::size_t total = 0;
  for (const auto& c : chains) total += static_cast<std::size_t>(c.draws.rows());
  if (total < 100) throw InsufficientDraws("summary needs at least 100 pooled draws");
  const Eigen::Index d = chains.front().draws.cols();

  PosteriorSummary s;
  s.alpha = alpha;
  s.draws = total;
  s.mean.resize(d);
  s.sd.resize(d);
  s.ess.resize(d);
  s.rhat.resize(d);
  s.credible_intervals.resize(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) {
    auto x = pooled_column(chains, i);
    s.mean[i] = mean(x);
    s.sd[i] = std::sqrt(variance(x));
    std::sort(x.begin(), x.end());
    s.credible_intervals[static_cast<std::size_t>(i)] = {quantile_sorted(x, alpha / 2.0),
                                                         quantile_sorted(x, 1.0 - alpha / 2.0)};
    s.ess[i] = batch_means_ess(chains, i);
    s.rhat[i] = split_rhat(chains, i);
  }

  const Chain* best_chain = nullptr;
  Eigen::Index best_row = 0;
  for (const auto& c : chains)
    for (Eigen::Index r = 0; r < c.log_density.size(); ++r)
      if (!best_chain || c.log_density[r] > best_chain->log_density[best_row]) {
        best_chain = &c;
        best_row = r;
      }
  s.map = best_chain->draws.row(best_row).transpose();
  s.map_log_density = best_chain->log_density[best_row];
  if (refine) {
    const std::vector<Vector> starts{s.map};
    const MapResult r = maximize(*refine, starts);
    if (r.log_density > s.map_log_density) {
      s.map = r.theta;
      s.map_log_density = r.log_density;
    }
  }
  return s;
}

BvmReport bvm_diagnostic(const std::vector<Chain>& chains, const Vector& center,
                         const Matrix& covariance) {
  const Eigen::Index d = center.size();
  if (covariance.rows() != d || covariance.cols() != d)
    throw SingularCovariance("covariance shape does not match the center");
  if (!covariance.isApprox(covariance.transpose(), 1e-10))
    throw SingularCovariance("covariance is not symmetric");
  Eigen::LLT<Matrix> llt(covariance);
  if (llt.info() != Eigen::Success || !(covariance.diagonal().array() > 0.0).all())
    throw SingularCovariance("covariance is not positive definite");
  BvmReport report;
  report.center = center;
  report.reference_covariance = covariance;
  report.ks_statistic.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    auto x = pooled_column(chains, i);
    if (x.empty()) throw InsufficientDraws("no draws for the BvM diagnostic");
    const double scale = std::sqrt(covariance(i, i));
    for (double& v : x) v = (v - center[i]) / scale;
    report.ks_statistic[i] = ks_standard_normal(std::move(x));
  }
  return report;
}

Matrix plugin_covariance(const LikelihoodFamily& family, const Vector& theta, double n) {
  const Matrix info = family.fisher_information(theta);
  Eigen::LLT<Matrix> llt(info);
  if (llt.info() != Eigen::Success) throw SingularCovariance("Fisher information is singular");
  return llt.solve(Matrix::Identity(info.rows(), info.cols())) / n;
}

ContaminationSpec ContaminationSpec::point_mass(std::size_t count, double value, std::uint64_t seed) {
  return {count, Generator::point_mass, value, 0.0, seed};
}

ContaminationSpec ContaminationSpec::gaussian(std::size_t count, double mean, double sd,
                                              std::uint64_t seed) {
  if (!(sd > 0.0)) throw InvalidArgument("contamination sd must be positive");
  return {count, Generator::gaussian, mean, sd, seed};
}

std::vector<std::size_t> contamination_indices(std::size_t n, const ContaminationSpec& spec) {
  if (spec.count > n)
    throw TooManyOutliers("cannot replace " + std::to_string(spec.count) + " of " +
                          std::to_string(n) + " observations");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(spec.seed);
  // Partial Fisher-Yates: the first `count` slots are a uniform subset.
  for (std::size_t i = 0; i < spec.count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(spec.count);
  return idx;
}

Dataset contaminate(const Dataset& data, const ContaminationSpec& spec) {
  const auto idx = contamination_indices(data.size(), spec);
  std::vector<double> values = data.values();
  std::mt19937_64 rng(chain_seed(spec.seed, 1));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i : idx)
    values[i] = spec.generator == ContaminationSpec::Generator::point_mass
                    ? spec.value
                    : spec.value + spec.sd * noise(rng);
  return data.with_values(std::move(values));
}

namespace {

double rmse(const std::vector<DeviationRow>& rows, double DeviationRow::*field) {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += (r.*field) * (r.*field);
  return std::sqrt(s / static_cast<double>(rows.size()));
}

Dataset simulate_scalars(const LikelihoodFamily& family, const Vector& theta0, std::size_t N,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> x(N);
  for (double& v : x) v = family.simulate(theta0, rng);
  return Dataset::scalars(std::move(x));
}

}  // namespace

double DeviationTable::mom_rmse() const { return rmse(rows, &DeviationRow::mom_error); }
double DeviationTable::mean_rmse() const { return rmse(rows, &DeviationRow::mean_error); }

DeviationTable deviation_harness(const DeviationConfig& cfg) {
  if (cfg.replications < 100) throw InvalidArgument("deviation harness needs >= 100 replications");
  cfg.schedule.validate();
  const Rho rho(cfg.rho);
  const double target = cfg.family.expected_increment(cfg.theta, cfg.theta_prime, cfg.theta0);
  DeviationTable table;
  table.rows.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(cfg.replications, cfg.threads, [&](int r) {
    const std::uint64_t base = chain_seed(cfg.seed, r);
    Dataset data = simulate_scalars(cfg.family, cfg.theta0, cfg.N, chain_seed(base, 0));
    if (cfg.contamination) {
      ContaminationSpec spec = *cfg.contamination;
      spec.seed = chain_seed(base, 1);
      data = contaminate(data, spec);
    }
    const BlockPartition part = partition_blocks(cfg.N, cfg.k, cfg.scheme, chain_seed(base, 2));
    const MomEstimate est =
        mom_increment(cfg.family, cfg.theta, cfg.theta_prime, data, part, rho, cfg.schedule);
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
      sum += cfg.family.nll_increment(cfg.theta, cfg.theta_prime, data[i]);
    auto& row = table.rows[static_cast<std::size_t>(r)];
    row.replication = r;
    row.mom_error = est.value - target;
    row.mean_error = sum / static_cast<double>(data.size()) - target;
  });
  return table;
}

double NormalityTable::variance(Eigen::Index coord) const {
  std::vector<double> x;
  for (const auto& e : errors) x.push_back(e[coord]);
  return mombayes::variance(x);
}

double NormalityTable::ks(const Matrix& inverse_fisher, Eigen::Index coord) const {
  const double scale = std::sqrt(inverse_fisher(coord, coord));
  std::vector<double> x;
  for (const auto& e : errors) x.push_back(e[coord] / scale);
  return ks_standard_normal(std::move(x));
}

NormalityTable normality_harness(const NormalityConfig& cfg) {
  if (cfg.replications < 100) throw InvalidArgument("normality harness needs >= 100 replications");
  const Rho rho(cfg.rho);
  const Vector theta_prime = cfg.theta0 + cfg.reference_offset;
  const Prior prior = Prior::uniform_box(cfg.family.domain());
  NormalityTable table;
  table.errors.resize(static_cast<std::size_t>(cfg.replications));
  const double root_n = std::sqrt(static_cast<double>(cfg.N));
  parallel_for(cfg.replications, cfg.threads, [&](int r) {
    const std::uint64_t base = chain_seed(cfg.seed, r);
    Dataset data = simulate_scalars(cfg.family, cfg.theta0, cfg.N, chain_seed(base, 0));
    BlockPartition part = partition_blocks(cfg.N, cfg.k, cfg.scheme, chain_seed(base, 2));
    const ScaleSchedule schedule =
        cfg.schedule ? *cfg.schedule : calibrate_schedule(cfg.family, theta_prime, data, part);
    const RobustPosterior post(cfg.family, prior, ReferencePoint(theta_prime, cfg.family.domain()),
                               std::move(data), std::move(part), rho, schedule);
    const MapResult map = map_estimate(post, 1, chain_seed(base, 3));
    table.errors[static_cast<std::size_t>(r)] = root_n * (map.theta - cfg.theta0);
  });
  return table;
}

}  // namespace mombayes
