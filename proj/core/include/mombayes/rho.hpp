#pragma once

#include <memory>
#include <string_view>
#include <vector>

namespace mombayes {

enum class RhoKind { absolute, huber, smoothed_huber };

RhoKind parse_rho_kind(std::string_view name);
std::string_view to_string(RhoKind kind);

struct RhoSpec {
  RhoKind kind = RhoKind::huber;
  /// Huber transition point b: quadratic on |z| <= b, linear beyond.
  double breakpoint = 1.5;
  /// Half-width of the mollifier support (smoothed_huber only).
  double mollifier_halfwidth = 0.5;
  /// Gauss-Legendre nodes per smooth piece of the convolution integral.
  int quadrature_order = 64;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendreRule gauss_legendre(int order);

/**
 * Convex, even loss used by the median-of-means M-estimator, with its first
 * two derivatives.
 *
 * The smoothed variant is the convolution of the Huber function with the
 * compactly supported bump psi(t) = C exp(-4 / (1 - (t/h)^2)). It is tabulated
 * once at construction (values, first and second derivatives on a uniform grid
 * over [0, b + h]) and read back by cubic Hermite interpolation; beyond b + h
 * the convolution coincides with the linear Huber branch exactly.
 *
 * Copies share the table; instances are immutable after construction.
 */
class Rho {
 public:
  explicit Rho(RhoSpec spec = {});

  double value(double z) const;
  /// For the absolute loss the subgradient selection sign(z) is returned (0 at 0).
  double deriv1(double z) const;
  /// Throws UnsupportedLoss for the absolute loss.
  double deriv2(double z) const;

  const RhoSpec& spec() const { return spec_; }
  RhoKind kind() const { return spec_.kind; }
  bool differentiable() const { return spec_.kind != RhoKind::absolute; }

  /// sup |rho'|; the score of a saturated residual.
  double saturation() const;

  /// Normalizing constant C of the mollifier (1 for non-smoothed kinds).
  double mollifier_norm_constant() const { return norm_constant_; }

  /// Unnormalized mollifier exp(-4 / (1 - (t/h)^2)) on |t| < h, 0 elsewhere.
  double mollifier_shape(double t) const;

 private:
  struct Table;

  double huber_value(double a) const;

  RhoSpec spec_;
  double norm_constant_ = 1.0;
  std::shared_ptr<const Table> table_;
};

}  // namespace mombayes
