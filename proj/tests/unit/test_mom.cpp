#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mombayes/errors.hpp"
#include "mombayes/mom.hpp"
#include "mombayes/stats.hpp"

using namespace mombayes;

namespace {

Vector v1(double x) { return Vector::Constant(1, x); }

Box box1(double lo, double hi) { return Box(v1(lo), v1(hi)); }

Rho make(RhoKind kind) {
  RhoSpec s;
  s.kind = kind;
  return Rho(s);
}

ScaleSchedule fixed(double c) {
  ScaleSchedule s;
  s.c = c;
  s.exponent = 0.25;
  return s;
}

// Independent median: sort and take the middle (average of the two for even sizes).
double naive_median(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t m = x.size();
  return m % 2 ? x[m / 2] : 0.5 * (x[m / 2 - 1] + x[m / 2]);
}

Dataset gaussian_data(std::size_t n, double mu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(mu, 1.0);
  std::vector<double> x(n);
  for (auto& xi : x) xi = z(rng);
  return Dataset::scalars(std::move(x));
}

}  // namespace

TEST_CASE("partition examples") {
  const auto p = partition_blocks(6, 3, PartitionScheme::contiguous, 0);
  CHECK(p.n == 2);
  CHECK(p.blocks == std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}, {4, 5}});

  const auto q = partition_blocks(7, 3, PartitionScheme::contiguous, 0);
  CHECK(q.n == 2);
  CHECK(q.effective_size() == 6);

  CHECK(partition_blocks(4898, 31, PartitionScheme::shuffled, 1).n == 158);

  CHECK_THROWS_AS(partition_blocks(7, 4, PartitionScheme::contiguous, 0), InvalidK);
  CHECK_THROWS_AS(partition_blocks(7, 0, PartitionScheme::contiguous, 0), InvalidK);
  CHECK_NOTHROW(partition_blocks(7, 3, PartitionScheme::contiguous, 0));
}

TEST_CASE("shuffled partitions are disjoint and seeded") {
  const auto a = partition_blocks(1001, 40, PartitionScheme::shuffled, 9);
  const auto b = partition_blocks(1001, 40, PartitionScheme::shuffled, 9);
  const auto c = partition_blocks(1001, 40, PartitionScheme::shuffled, 10);
  CHECK(a.blocks == b.blocks);
  CHECK(a.blocks != c.blocks);
  std::set<std::size_t> seen;
  for (const auto& blk : a.blocks) {
    CHECK(blk.size() == 25);
    for (auto i : blk) {
      CHECK(i < 1001);
      seen.insert(i);
    }
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("block average examples") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const Dataset d = Dataset::scalars({2, 2, 0, 0});
  const auto p = partition_blocks(4, 2, PartitionScheme::contiguous, 0);
  const auto avg = block_averages(g, v1(1.0), v1(0.0), d, p);
  REQUIRE(avg.size() == 2);
  CHECK(avg[0] == doctest::Approx(-1.5));
  CHECK(avg[1] == doctest::Approx(0.5));

  for (double a : block_averages(g, v1(0.3), v1(0.3), d, p)) CHECK(a == 0.0);

  const Dataset e = gaussian_data(9, 0.0, 2);
  const auto one = partition_blocks(9, 1, PartitionScheme::contiguous, 0);
  double full = 0.0;
  for (std::size_t i = 0; i < 9; ++i) full += g.nll_increment(v1(0.4), v1(-0.2), e[i]);
  CHECK(block_averages(g, v1(0.4), v1(-0.2), e, one)[0] == doctest::Approx(full / 9));
  CHECK_THROWS_AS(block_averages(g, v1(11.0), v1(0.0), d, p), DomainError);
}

TEST_CASE("solve_mom examples") {
  const std::vector<double> a = {1, 2, 100};
  CHECK(solve_mom(a, make(RhoKind::absolute), 1, fixed(1)).value == 2.0);

  const std::vector<double> b = {-1, 0, 1};
  CHECK(std::abs(solve_mom(b, make(RhoKind::huber), 1, fixed(1)).value) < 1e-12);

  const std::vector<double> c = {0, 0, 10};
  for (RhoKind kind : {RhoKind::huber, RhoKind::smoothed_huber})
    CHECK(std::abs(solve_mom(c, make(kind), 1, fixed(100)).value - 10.0 / 3.0) < 1e-9);

  const std::vector<double> bad = {0, std::nan(""), 1};
  CHECK_THROWS_AS(solve_mom(bad, make(RhoKind::huber), 1, fixed(1)), NonFiniteInput);
  const std::vector<double> none;
  CHECK_THROWS(solve_mom(none, make(RhoKind::huber), 1, fixed(1)));
}

TEST_CASE("absolute loss matches an independent median") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(1, 40);
  std::normal_distribution<double> z(0.0, 5.0);
  const Rho r = make(RhoKind::absolute);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(static_cast<std::size_t>(len(rng)));
    for (auto& xi : x) xi = z(rng);
    CHECK(solve_mom(x, r, 3, fixed(1)).value == doctest::Approx(naive_median(x)).epsilon(1e-12));
  }
}

TEST_CASE("range, translation and permutation") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> z(0.0, 3.0);
  for (RhoKind kind : {RhoKind::absolute, RhoKind::huber, RhoKind::smoothed_huber}) {
    CAPTURE(to_string(kind));
    const Rho r = make(kind);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(11);
      for (auto& xi : x) xi = z(rng);
      const auto est = solve_mom(x, r, 4, fixed(0.7));
      CHECK(est.value >= *std::min_element(x.begin(), x.end()));
      CHECK(est.value <= *std::max_element(x.begin(), x.end()));
      CHECK(est.flat_fraction >= 0.0);
      CHECK(est.flat_fraction <= 1.0);

      const double shift = z(rng);
      std::vector<double> y = x;
      for (auto& yi : y) yi += shift;
      CHECK(std::abs(solve_mom(y, r, 4, fixed(0.7)).value - (est.value + shift)) < 1e-12 * (1 + std::abs(shift)) + 1e-12);

      std::shuffle(y.begin(), y.end(), rng);
      for (auto& yi : y) yi -= shift;
      std::vector<double> p = x;
      std::shuffle(p.begin(), p.end(), rng);
      CHECK(std::abs(solve_mom(p, r, 4, fixed(0.7)).value - est.value) < 1e-12);
    }
  }
}

TEST_CASE("linear region reproduces the mean") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(2.0, 1.0);
  for (RhoKind kind : {RhoKind::huber, RhoKind::smoothed_huber}) {
    const Rho r = make(kind);
    for (int t = 0; t < 200; ++t) {
      std::vector<double> x(15);
      for (auto& xi : x) xi = z(rng);
      const double m = mean(x);
      double spread = 0.0;
      for (double xi : x) spread = std::max(spread, std::abs(xi - m));
      const int n = 9;
      // c n^0.25 >= sqrt(n) * spread puts every residual in |u| <= 1.
      ScaleSchedule s = fixed(spread * std::sqrt(n) / std::pow(n, 0.25) * 1.0001);
      CHECK(std::abs(solve_mom(x, r, n, s).value - m) < 1e-10);
    }
  }
}

TEST_CASE("bounded influence of one block") {
  for (RhoKind kind : {RhoKind::absolute, RhoKind::huber, RhoKind::smoothed_huber}) {
    CAPTURE(to_string(kind));
    const Rho r = make(kind);
    std::vector<double> x = {-0.3, 0.1, 0.4, -0.2, 0.0, 0.25, -0.1, 0.6, 0.0};
    const double base = solve_mom(x, r, 16, fixed(1)).value;
    double prev = base;
    double last = base;
    for (double big = 1.0; big <= 1e12; big *= 10.0) {
      x.back() = big;
      last = solve_mom(x, r, 16, fixed(1)).value;
      CHECK(last >= prev - 1e-12);
      CHECK(last <= 0.6);
      prev = last;
    }
    x.back() = 1e6;
    CHECK(std::abs(solve_mom(x, r, 16, fixed(1)).value - last) < 1e-12);
  }
}

TEST_CASE("mom_increment examples") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const Dataset d = gaussian_data(200, 0.5, 5);
  const auto p = partition_blocks(200, 10, PartitionScheme::shuffled, 3);
  const Rho hub = make(RhoKind::huber);
  CHECK(mom_increment(g, v1(0.2), v1(0.2), d, p, hub, fixed(1)).value == 0.0);

  double full = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) full += g.nll_increment(v1(0.9), v1(0.1), d[i]);
  full /= static_cast<double>(d.size());
  CHECK(std::abs(mom_increment(g, v1(0.9), v1(0.1), d, p, hub, fixed(1e8)).value - full) < 1e-9);

  // One block corrupted: absolute loss ignores the magnitude.
  const auto five = partition_blocks(50, 5, PartitionScheme::contiguous, 0);
  const Rho abs = make(RhoKind::absolute);
  std::vector<double> x = gaussian_data(50, 0.0, 6).values();
  double prev = 0.0;
  for (double mag : {1e3, 1e6, 1e9}) {
    std::fill(x.begin() + 40, x.end(), mag);
    const Dataset bad = Dataset::scalars(x);
    const auto avg = block_averages(g, v1(0.5), v1(0.0), bad, five);
    const double value = mom_increment(g, v1(0.5), v1(0.0), bad, five, abs, fixed(1)).value;
    CHECK(value == doctest::Approx(naive_median(avg)));
    if (mag > 1e3) CHECK(value == prev);
    prev = value;
  }
}

TEST_CASE("grad_mom matches finite differences") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const auto l = LikelihoodFamily::laplace_location(1.0, box1(-10, 10));
  for (RhoKind kind : {RhoKind::huber, RhoKind::smoothed_huber}) {
    CAPTURE(to_string(kind));
    const Rho r = make(kind);
    for (int t = 0; t < 50; ++t) {
      const Dataset d = gaussian_data(300, 0.0, 100 + static_cast<std::uint64_t>(t));
      const auto p = partition_blocks(300, 15, PartitionScheme::shuffled, static_cast<std::uint64_t>(t));
      const ScaleSchedule s = fixed(0.5);
      for (const auto* f : {&g, &l}) {
        const Vector theta = v1(u(rng));
        const Vector ref = v1(-2.0);
        const auto est = mom_increment(*f, theta, ref, d, p, r, s);
        const double an = grad_mom(*f, theta, ref, d, p, r, s, est)(0);
        const double h = 1e-6;
        const double fd = (mom_increment(*f, theta + v1(h), ref, d, p, r, s).value -
                           mom_increment(*f, theta - v1(h), ref, d, p, r, s).value) /
                          (2 * h);
        CHECK(std::abs(fd - an) <= 1e-5 * std::max(1.0, std::abs(an)));
      }
    }
  }
}

TEST_CASE("grad_mom in the linear region is the plain average gradient") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const Dataset d = gaussian_data(120, 1.0, 8);
  const auto p = partition_blocks(120, 12, PartitionScheme::shuffled, 2);
  const Rho r = make(RhoKind::huber);
  const ScaleSchedule s = fixed(1e8);
  const auto est = mom_increment(g, v1(0.3), v1(0.0), d, p, r, s);
  double plain = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) plain += g.grad_nll(v1(0.3), d[i])(0);
  plain /= static_cast<double>(d.size());
  CHECK(grad_mom(g, v1(0.3), v1(0.0), d, p, r, s, est)(0) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("a saturated block gets zero weight") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-200, 200));
  // Contiguous blocks of 4; the last block holds the outliers.
  const std::vector<double> x = {0.05, -0.05, 0.1,  -0.1, 0.02, 0.0, -0.03, 0.04, -0.08, 0.06,
                                 0.01, 0.0,   -0.02, 0.03, 0.0, 0.01, 100,  100,  100,   100};
  const Dataset d = Dataset::scalars(x);
  const auto p = partition_blocks(20, 5, PartitionScheme::contiguous, 0);
  const Rho r = make(RhoKind::huber);
  const ScaleSchedule s = fixed(1.0);
  const Vector theta = v1(0.5), ref = v1(0.0);
  const auto est = mom_increment(g, theta, ref, d, p, r, s);
  CHECK(est.flat_fraction == doctest::Approx(0.2));
  double clean = 0.0;
  for (std::size_t i = 0; i < 16; ++i) clean += g.grad_nll(theta, d[i])(0);
  clean /= 16.0;
  CHECK(grad_mom(g, theta, ref, d, p, r, s, est)(0) == doctest::Approx(clean).epsilon(1e-12));
}

TEST_CASE("all blocks saturated raises FlatScore") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-200, 200));
  const Dataset d = Dataset::scalars({-100, -100, 100, 100});
  const auto p = partition_blocks(4, 2, PartitionScheme::contiguous, 0);
  const Rho r = make(RhoKind::huber);
  const auto est = mom_increment(g, v1(1.0), v1(0.0), d, p, r, fixed(1.0));
  CHECK(est.flat_fraction == 1.0);
  CHECK(std::abs(est.value - 0.5) < 1e-9);  // midpoint of the flat interval
  CHECK_THROWS_AS(grad_mom(g, v1(1.0), v1(0.0), d, p, r, fixed(1.0), est), FlatScore);
  CHECK_THROWS_AS(grad_mom(g, v1(1.0), v1(0.0), d, p, make(RhoKind::absolute), fixed(1.0), est),
                  UnsupportedLoss);
}

TEST_CASE("scale schedule") {
  ScaleSchedule s = fixed(2.0);
  CHECK(s.delta(16) == doctest::Approx(4.0));
  CHECK(s.delta(1) <= s.delta(2));
  s.c = 1e-20;
  CHECK(s.delta(1) == s.floor);
  s.c = -1.0;
  CHECK_THROWS(s.validate());
  s.c = 1.0;
  s.exponent = 0.5;
  CHECK_THROWS(s.validate());
}

TEST_CASE("calibrated scale is the scaled MAD at the pilot") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const Dataset d = gaussian_data(400, 0.2, 12);
  const auto p = partition_blocks(400, 20, PartitionScheme::shuffled, 1);
  const Vector ref = v1(-1.0);
  const Vector pilot = blockwise_median_mle(g, d, p);
  std::vector<double> blockmle;
  for (const auto& blk : p.blocks) {
    double m = 0.0;
    for (auto i : blk) m += d.values()[i];
    blockmle.push_back(m / static_cast<double>(blk.size()));
  }
  CHECK(pilot(0) == doctest::Approx(naive_median(blockmle)).epsilon(1e-12));
  auto avg = block_averages(g, pilot, ref, d, p);
  for (auto& a : avg) a *= std::sqrt(static_cast<double>(p.n));
  const auto s = calibrate_schedule(g, ref, d, p);
  CHECK(s.c == doctest::Approx(1.4826 * median_absolute_deviation(avg)).epsilon(1e-12));
  CHECK(s.exponent == 0.25);
}
