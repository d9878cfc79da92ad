#include "mombayes/rho.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mombayes/errors.hpp"

namespace mombayes {

RhoKind parse_rho_kind(std::string_view name) {
  if (name == "absolute") return RhoKind::absolute;
  if (name == "huber") return RhoKind::huber;
  if (name == "smoothed-huber" || name == "smoothed_huber") return RhoKind::smoothed_huber;
  throw InvalidArgument("unknown rho kind '" + std::string(name) + "'");
}

std::string_view to_string(RhoKind kind) {
  switch (kind) {
    case RhoKind::absolute:
      return "absolute";
    case RhoKind::huber:
      return "huber";
    case RhoKind::smoothed_huber:
      return "smoothed-huber";
  }
  return "?";
}

GaussLegendreRule gauss_legendre(int order) {
  if (order < 1) throw InvalidArgument("quadrature order must be positive");
  const auto m = static_cast<std::size_t>(order);
  GaussLegendreRule rule;
  if (m == 1) {
    rule.nodes = {0.0};
    rule.weights = {2.0};
    return rule;
  }
  rule.nodes.resize(m);
  rule.weights.resize(m);
  // Newton iteration on P_m starting from the Chebyshev-like guess.
  for (std::size_t i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(m) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (std::size_t j = 2; j <= m; ++j) {
        const double jd = static_cast<double>(j);
        const double p2 = ((2.0 * jd - 1.0) * x * p1 - (jd - 1.0) * p0) / jd;
        p0 = p1;
        p1 = p2;
      }
      dp = static_cast<double>(m) * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    rule.nodes[i] = -x;
    rule.nodes[m - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[i] = w;
    rule.weights[m - 1 - i] = w;
  }
  return rule;
}

struct Rho::Table {
  double step = 0.0;
  double end = 0.0;  // b + h
  std::vector<double> f0, f1, f2, f3;
  // b - rho' and its slope; interpolating the deficit keeps the tail monotone.
  std::vector<double> d1, d2;

  // Cubic Hermite on the grid; `f` values, `df` slopes.
  static double hermite(const std::vector<double>& f, const std::vector<double>& df, double step,
                        double x) {
    const double pos = x / step;
    auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= f.size()) i = f.size() - 2;
    const double t = pos - static_cast<double>(i);
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * f[i] + (t3 - 2 * t2 + t) * step * df[i] +
           (-2 * t3 + 3 * t2) * f[i + 1] + (t3 - t2) * step * df[i + 1];
  }
};

double Rho::mollifier_shape(double t) const {
  const double s = t / spec_.mollifier_halfwidth;
  const double q = 1.0 - s * s;
  if (q <= 0.0) return 0.0;
  return std::exp(-4.0 / q);
}

Rho::Rho(RhoSpec spec) : spec_(spec) {
  if (!(spec_.breakpoint > 0.0) || !std::isfinite(spec_.breakpoint))
    throw InvalidArgument("rho breakpoint must be positive and finite");
  if (spec_.kind != RhoKind::smoothed_huber) return;

  const double b = spec_.breakpoint;
  const double h = spec_.mollifier_halfwidth;
  if (!(h > 0.0) || spec_.quadrature_order < 2)
    throw InvalidArgument("smoothed huber needs a positive half-width and quadrature order >= 2");
  if (b - h < 1.0 - 1e-12 || b + h > 2.0 + 1e-12)
    throw InvalidArgument(
        "smoothed huber requires breakpoint - halfwidth >= 1 and breakpoint + halfwidth <= 2");

  const GaussLegendreRule rule = gauss_legendre(spec_.quadrature_order);
  double mass = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i)
    mass += h * rule.weights[i] * mollifier_shape(h * rule.nodes[i]);
  norm_constant_ = 1.0 / mass;
  if (!std::isfinite(norm_constant_) || norm_constant_ <= 0.0)
    throw InvalidArgument("mollifier normalizing constant is not finite");

  auto table = std::make_shared<Table>();
  constexpr int kStepsPerUnit = 2048;
  table->end = b + h;
  const auto count = static_cast<std::size_t>(std::ceil(table->end * kStepsPerUnit)) + 1;
  table->step = table->end / static_cast<double>(count - 1);
  table->f0.resize(count);
  table->f1.resize(count);
  table->f2.resize(count);
  table->f3.resize(count);
  table->d1.resize(count);
  table->d2.resize(count);

  const double c = norm_constant_;
  std::vector<double> cuts;
  for (std::size_t g = 0; g < count; ++g) {
    const double z = static_cast<double>(g) * table->step;
    // Split [-h, h] where H'' jumps: t = z - b and t = z + b.
    cuts.assign({-h, h});
    for (double k : {z - b, z + b})
      if (k > -h && k < h) cuts.push_back(k);
    std::sort(cuts.begin(), cuts.end());

    double v0 = 0.0, v1 = 0.0, v2 = 0.0, gap = 0.0;
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
      const double lo = cuts[p];
      const double hi = cuts[p + 1];
      const double half = 0.5 * (hi - lo);
      const double mid = 0.5 * (hi + lo);
      if (half <= 0.0) continue;
      const bool inside = std::abs(z - mid) <= b;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        const double t = mid + half * rule.nodes[i];
        const double w = half * rule.weights[i] * c * mollifier_shape(t);
        v0 += w * huber_value(z - t);
        v1 += w * std::clamp(z - t, -b, b);
        gap += w * (b - std::clamp(z - t, -b, b));
        if (inside) v2 += w;
      }
    }
    table->f0[g] = v0;
    table->f1[g] = v1;
    table->f2[g] = v2;
    table->d1[g] = gap;
    table->d2[g] = -v2;
    table->f3[g] = c * (mollifier_shape(z + b) - mollifier_shape(z - b));
  }
  table_ = std::move(table);
}

double Rho::huber_value(double a) const {
  const double b = spec_.breakpoint;
  a = std::abs(a);
  return a <= b ? 0.5 * a * a : b * (a - 0.5 * b);
}

double Rho::saturation() const {
  return spec_.kind == RhoKind::absolute ? 1.0 : spec_.breakpoint;
}

double Rho::value(double z) const {
  const double a = std::abs(z);
  switch (spec_.kind) {
    case RhoKind::absolute:
      return a;
    case RhoKind::huber:
      return huber_value(a);
    case RhoKind::smoothed_huber:
      if (a >= table_->end) return huber_value(a);
      return Table::hermite(table_->f0, table_->f1, table_->step, a);
  }
  return 0.0;
}

double Rho::deriv1(double z) const {
  const double a = std::abs(z);
  const double sign = z < 0.0 ? -1.0 : 1.0;
  switch (spec_.kind) {
    case RhoKind::absolute:
      return z == 0.0 ? 0.0 : sign;
    case RhoKind::huber:
      return sign * std::min(a, spec_.breakpoint);
    case RhoKind::smoothed_huber:
      if (a >= table_->end) return sign * spec_.breakpoint;
      // Exact identity region; keeps rho'(z) == z bitwise there.
      if (a <= spec_.breakpoint - spec_.mollifier_halfwidth) return z;
      return sign * (spec_.breakpoint -
                     std::max(Table::hermite(table_->d1, table_->d2, table_->step, a), 0.0));
  }
  return 0.0;
}

double Rho::deriv2(double z) const {
  const double a = std::abs(z);
  switch (spec_.kind) {
    case RhoKind::absolute:
      throw UnsupportedLoss("rho'' is undefined for the absolute loss");
    case RhoKind::huber:
      return a <= spec_.breakpoint ? 1.0 : 0.0;
    case RhoKind::smoothed_huber:
      if (a >= table_->end) return 0.0;
      if (a <= spec_.breakpoint - spec_.mollifier_halfwidth) return 1.0;
      return std::clamp(Table::hermite(table_->f2, table_->f3, table_->step, a), 0.0, 1.0);
  }
  return 0.0;
}

}  // namespace mombayes
