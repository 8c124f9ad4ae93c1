#pragma once

#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "normprimes/polyform.hpp"

namespace normprimes {

enum class QuadratureMethod { adaptive_simpson, gauss_legendre_composite };

struct QuadratureSpec {
  double abs_tol = 1e-10;
  int max_depth = 40;
  QuadratureMethod method = QuadratureMethod::adaptive_simpson;

  void validate() const;
};

enum class KernelKind { circular, hyperbolic };

std::string_view to_string(KernelKind kind) noexcept;

/// Integrates g over [a, b] to spec.abs_tol. Throws AccuracyError carrying
/// the best estimate when max_depth is exhausted first.
double integrate(const std::function<double(double)>& g, double a, double b, const QuadratureSpec& spec);

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendreRule gauss_legendre_rule(int n);

/// F(T) = integral over [0, T] of f(1,t)^(-2/n).
double integrate_F(const NormForm& f, double T, const QuadratureSpec& spec = {});

/// Closed forms of F for x^2 - d y^2: atan(T sqrt|d|)/sqrt|d| when d < 0,
/// atanh(T sqrt d)/sqrt d when d > 0.
double closed_F_quadratic(std::int64_t d, double T);

/// Solves integrate_F(f, t) = u for t in [0, t_cap] by bisection. The
/// default cap is singularity_bound(f) - 1e-6 (or 1e6 for forms that never
/// vanish).
double invert_F(const NormForm& f, double u, const QuadratureSpec& spec = {},
                double t_cap = std::numeric_limits<double>::quiet_NaN());

/// Cut points t_j with F(t_j) = j/k, kept while t_j <= cap, rounded to four
/// decimals.
std::vector<double> decile_cuts(const NormForm& f, double cap, int k, const QuadratureSpec& spec = {});

/// Pair kernel as a function of the angle difference x. Even in x; both
/// kinds equal 1/3 at x = 0.
double kernel(KernelKind kind, double x);

/// Integral of kernel(alpha - beta) over [0, theta]^2, reduced to
/// 2 * integral_0^theta (theta - x) kernel(x) dx.
double D_kernel_integral(KernelKind kind, double theta, const QuadratureSpec& spec = {});

/// Integral of kernel(alpha - beta) over [lo, hi]^2, assembled from
/// D(hi) - D(lo) minus the two strips [0,lo] x [lo,hi].
double cone_square_integral(KernelKind kind, double lo, double hi, const QuadratureSpec& spec = {});

/// Radial factor of the continuous double zeta at (2, 2): integral_1^inf r^-7 dr.
inline constexpr double kDoubleZetaRadialConstant = 1.0 / 6.0;
/// The constant printed at the end of the published derivation.
inline constexpr double kDoubleZetaPrintedConstant = 1.0 / 8.0;

/// Continuous cone zeta at real s: F(T) / (n s - 1).
double zeta_continuous_single(const NormForm& f, double s, double T, const QuadratureSpec& spec = {});

/// Continuous cone double zeta at (2, 2) for quadratic fields.
double zeta_continuous_double_quadratic(KernelKind kind, double theta, const QuadratureSpec& spec = {});

}  // namespace normprimes
