#include <doctest.h>

#include <cmath>
#include <random>

#include "mombayes/errors.hpp"
#include "mombayes/models.hpp"

using namespace mombayes;

namespace {

Vector v(std::initializer_list<double> xs) {
  Vector out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out(i++) = x;
  return out;
}

Box box1(double lo, double hi) { return Box(v({lo}), v({hi})); }

Observation scalar(const double& x) { return {x, {}}; }

}  // namespace

TEST_CASE("increment examples") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const double x = 2.0;
  CHECK(g.nll_increment(v({1.0}), v({1.0}), scalar(x)) == 0.0);
  CHECK(g.nll_increment(v({1.0}), v({0.0}), scalar(x)) == doctest::Approx(-1.5).epsilon(1e-14));

  const auto l = LikelihoodFamily::laplace_location(1.0, box1(-10, 10));
  const double y = 0.5;
  CHECK(std::abs(l.nll_increment(v({1.0}), v({0.0}), scalar(y))) < 1e-15);

  CHECK_THROWS_AS(g.nll_increment(v({11.0}), v({0.0}), scalar(x)), DomainError);
}

TEST_CASE("gradient examples") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const double x = 3.0;
  CHECK(g.grad_nll(v({0.0}), scalar(x))(0) == doctest::Approx(-3.0));

  const auto p = LikelihoodFamily::poisson_rate(box1(1e-3, 100));
  const double two = 2.0;
  CHECK(std::abs(p.grad_nll(v({2.0}), scalar(two))(0)) < 1e-15);

  const auto l = LikelihoodFamily::laplace_location(1.0, box1(-10, 10));
  const double kink = 1.0;
  CHECK_THROWS_AS(l.grad_nll(v({1.0}), scalar(kink)), NonDifferentiablePoint);
  CHECK(l.grad_nll(v({1.0}), scalar(kink), KinkPolicy::subgradient_zero)(0) == 0.0);
}

TEST_CASE("increment cocycle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0), pos(0.2, 5.0);
  const auto g = LikelihoodFamily::gaussian_location(1.3, box1(-10, 10));
  const auto l = LikelihoodFamily::laplace_location(0.7, box1(-10, 10));
  const auto p = LikelihoodFamily::poisson_rate(box1(1e-3, 100));
  for (int i = 0; i < 200; ++i) {
    const Vector a = v({u(rng)}), b = v({u(rng)}), c = v({u(rng)});
    const double x = u(rng);
    for (const auto* f : {&g, &l}) {
      const double lhs = f->nll_increment(a, b, scalar(x)) + f->nll_increment(b, c, scalar(x));
      CHECK(std::abs(lhs - f->nll_increment(a, c, scalar(x))) < 1e-12);
    }
    const Vector pa = v({pos(rng)}), pb = v({pos(rng)}), pc = v({pos(rng)});
    const double count = std::floor(pos(rng) * 3);
    const double lhs = p.nll_increment(pa, pb, scalar(count)) + p.nll_increment(pb, pc, scalar(count));
    CHECK(std::abs(lhs - p.nll_increment(pa, pc, scalar(count))) < 1e-12);
  }
}

TEST_CASE("regression gradient matches finite differences") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const std::size_t p = 3;
  Box dom(v({-10, -10, -10, 1e-3}), v({10, 10, 10, 5}));
  const auto f = LikelihoodFamily::linear_regression(p, dom);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> cov = {1.0, z(rng), z(rng)};
    const Dataset d = Dataset::regression({z(rng)}, cov, p);
    Vector theta = v({z(rng), z(rng), z(rng), 0.5 + std::abs(z(rng))});
    const Vector ref = v({0.0, 0.0, 0.0, 1.0});
    const Vector grad = f.grad_nll(theta, d[0]);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(theta(i)));
      Vector up = theta, dn = theta;
      up(i) += h;
      dn(i) -= h;
      const double fd =
          (f.nll_increment(up, ref, d[0]) - f.nll_increment(dn, ref, d[0])) / (2 * h);
      CHECK(std::abs(fd - grad(i)) <= 1e-6 * std::max(1.0, std::abs(grad(i))));
    }
  }
}

TEST_CASE("scalar gradients match finite differences") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0), pos(0.5, 6.0);
  const auto g = LikelihoodFamily::gaussian_location(0.8, box1(-10, 10));
  const auto l = LikelihoodFamily::laplace_location(1.5, box1(-10, 10));
  const auto p = LikelihoodFamily::poisson_rate(box1(1e-3, 100));
  const auto check = [](const LikelihoodFamily& f, double theta, double x) {
    const double h = 1e-6;
    const Vector ref = v({1.0});
    const double fd = (f.nll_increment(v({theta + h}), ref, scalar(x)) -
                       f.nll_increment(v({theta - h}), ref, scalar(x))) /
                      (2 * h);
    const double an = f.grad_nll(v({theta}), scalar(x))(0);
    CHECK(std::abs(fd - an) <= 1e-6 * std::max(1.0, std::abs(an)));
  };
  for (int i = 0; i < 200; ++i) {
    check(g, u(rng), u(rng));
    const double t = u(rng), x = u(rng);
    if (std::abs(t - x) > 1e-3) check(l, t, x);
    check(p, pos(rng), std::floor(pos(rng)));
  }
}

TEST_CASE("fisher information examples") {
  CHECK(LikelihoodFamily::gaussian_location(1.0, box1(-5, 5)).fisher_information(v({0}))(0, 0) ==
        doctest::Approx(1.0));
  CHECK(LikelihoodFamily::poisson_rate(box1(1e-3, 100)).fisher_information(v({4}))(0, 0) ==
        doctest::Approx(0.25));
  CHECK(LikelihoodFamily::laplace_location(1.0, box1(-5, 5)).fisher_information(v({0}))(0, 0) ==
        doctest::Approx(1.0));
  CHECK(LikelihoodFamily::gaussian_location(2.0, box1(-5, 5)).fisher_information(v({0}))(0, 0) ==
        doctest::Approx(0.25));
}

TEST_CASE("fisher information matches the score covariance") {
  constexpr int draws = 100000;
  std::mt19937_64 rng(21);
  const std::vector<std::pair<LikelihoodFamily, double>> cases = {
      {LikelihoodFamily::gaussian_location(1.5, box1(-10, 10)), 0.7},
      {LikelihoodFamily::laplace_location(0.8, box1(-10, 10)), -1.2},
      {LikelihoodFamily::poisson_rate(box1(1e-3, 100)), 3.5},
  };
  for (const auto& [family, t0] : cases) {
    CAPTURE(to_string(family.kind()));
    const Vector theta0 = v({t0});
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double x = family.simulate(theta0, rng);
      const double gr = family.grad_nll(theta0, scalar(x), KinkPolicy::subgradient_zero)(0);
      s += gr;
      s2 += gr * gr;
    }
    const double m = s / draws;
    const double var = s2 / draws - m * m;
    const double info = family.fisher_information(theta0)(0, 0);
    CHECK(std::abs(var - info) <= 0.05 * info);
    // Score has mean zero at the truth: within 4 Monte-Carlo standard errors.
    CHECK(std::abs(m) <= 4.0 * std::sqrt(info / draws));
  }
}

TEST_CASE("regression fisher information uses the design moment") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  const std::size_t n = 2000;
  std::vector<double> y(n), cov(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    cov[2 * i] = 1.0;
    cov[2 * i + 1] = z(rng);
    y[i] = 0.5 + 2.0 * cov[2 * i + 1] + 0.3 * z(rng);
  }
  const Dataset d = Dataset::regression(y, cov, 2);
  const auto f = LikelihoodFamily::linear_regression(2, Box(v({-10, -10, 1e-3}), v({10, 10, 1})))
                     .with_design_moment(d);
  const Matrix info = f.fisher_information(v({0.5, 2.0, 0.3}));
  CHECK(info.rows() == 3);
  CHECK((info - info.transpose()).norm() < 1e-12);
  CHECK(info(2, 2) == doctest::Approx(2.0 / 0.09));
  CHECK(info(0, 0) == doctest::Approx(1.0 / 0.09));
  CHECK(info.llt().info() == Eigen::Success);
}

TEST_CASE("prior examples") {
  const auto u = Prior::uniform_box(box1(-1, 1));
  CHECK(u.is_uniform());
  CHECK(u.log_density(v({0.0})) == u.log_density(v({0.9})));
  CHECK(u.grad_log_density(v({0.3}))(0) == 0.0);
  CHECK_THROWS_AS(u.log_density(v({1.5})), DomainError);

  const auto g = Prior::gaussian_diagonal(box1(-40, 0), v({-29.5}), v({1.0}));
  CHECK(g.grad_log_density(v({-29.5}))(0) == 0.0);
  CHECK(g.default_reference()(0) == -29.5);

  const auto w = Prior::gaussian_diagonal(box1(-50, 50), v({0.0}), v({10.0}));
  CHECK(w.grad_log_density(v({5.0}))(0) == doctest::Approx(-0.05));
  CHECK(w.log_density(v({0.0})) - w.log_density(v({10.0})) == doctest::Approx(0.5));

  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) CHECK(g.box().contains(g.sample(rng)));
  CHECK(Prior::uniform_box(box1(2, 6)).default_reference()(0) == 4.0);
}

TEST_CASE("closed-form mle examples") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  CHECK(closed_form_mle(g, Dataset::scalars({1, 2, 3}))(0) == doctest::Approx(2.0));
  const auto l = LikelihoodFamily::laplace_location(1.0, box1(-10, 10));
  CHECK(closed_form_mle(l, Dataset::scalars({0, 0, 5}))(0) == 0.0);
  const auto p = LikelihoodFamily::poisson_rate(box1(1e-3, 100));
  CHECK(closed_form_mle(p, Dataset::scalars({1, 4, 4}))(0) == doctest::Approx(3.0));
  // Clamped into the box.
  CHECK(closed_form_mle(g, Dataset::scalars({50, 60}))(0) == 10.0);
  CHECK_THROWS_AS(closed_form_mle(g, Dataset::scalars({})), EmptyData);

  std::vector<double> y, z;
  for (int i = 1; i <= 20; ++i) {
    z.push_back(0.1 * i - 1.0);
    y.push_back(2.0 * z.back());
  }
  const auto r = LikelihoodFamily::linear_regression(1, Box(v({-10, 1e-3}), v({10, 1})));
  const Vector mle = closed_form_mle(r, Dataset::regression(y, z, 1));
  CHECK(std::abs(mle(0) - 2.0) < 1e-10);
  CHECK(mle(1) == 1e-3);
}

TEST_CASE("non-finite observations are rejected") {
  const auto g = LikelihoodFamily::gaussian_location(1.0, box1(-10, 10));
  const double bad = std::nan("");
  CHECK_THROWS_AS(g.nll_increment(v({0.0}), v({1.0}), scalar(bad)), NonFiniteInput);
  const auto p = LikelihoodFamily::poisson_rate(box1(1e-3, 100));
  const double neg = -1.0;
  CHECK_THROWS(p.nll(v({1.0}), scalar(neg)));
}

TEST_CASE("box and reference point") {
  const Box b(v({0, 0}), v({1, 2}));
  CHECK(b.contains(v({1, 2})));
  CHECK_FALSE(b.interior(v({1, 1})));
  CHECK(b.interior(v({0.5, 1})));
  CHECK(b.clamp(v({3, -1})) == v({1, 0}));
  CHECK_THROWS_AS(Box(v({1}), v({0})), DomainError);
  CHECK_THROWS_AS(ReferencePoint(v({0, 1}), b), DomainError);
  CHECK_NOTHROW(ReferencePoint(v({0.5, 1}), b));
}

TEST_CASE("dataset views") {
  const Dataset d = Dataset::regression({1, 2, 3}, {1, 10, 1, 20, 1, 30}, 2);
  CHECK(d.size() == 3);
  CHECK(d[1].covariates[1] == 20.0);
  const std::vector<std::size_t> rows = {2, 0};
  const Dataset s = d.subset(rows);
  CHECK(s.values() == std::vector<double>{3, 1});
  CHECK(s[0].covariates[1] == 30.0);
  CHECK(d.with_values({7, 8, 9})[2].covariates[1] == 30.0);
  CHECK_THROWS(d.with_values({1}));
}
