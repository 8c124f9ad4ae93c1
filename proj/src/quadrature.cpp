#include "normprimes/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "normprimes/errors.hpp"

namespace normprimes {

void QuadratureSpec::validate() const {
  if (!(abs_tol > 0.0)) throw DomainError("quadrature abs_tol must be positive");
  if (max_depth < 4) throw DomainError("quadrature max_depth must be at least 4");
}

std::string_view to_string(KernelKind kind) noexcept {
  return kind == KernelKind::circular ? "circular" : "hyperbolic";
}

namespace {

struct SimpsonState {
  const std::function<double(double)>& g;
  bool exhausted = false;
};

double simpson_step(SimpsonState& st, double a, double b, double fa, double fm, double fb, double whole,
                    double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.g(lm);
  const double frm = st.g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0 || lm <= a || rm >= b) {
    st.exhausted = true;
    return left + right + delta / 15.0;
  }
  return simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& g, double a, double b, const QuadratureSpec& spec) {
  SimpsonState st{g};
  const double fa = g(a);
  const double fb = g(b);
  const double m = 0.5 * (a + b);
  const double fm = g(m);
  // Split once up front so a symmetric integrand cannot fool the first test.
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = g(lm);
  const double frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double tol = 0.5 * spec.abs_tol;
  const double result = simpson_step(st, a, m, fa, flm, fm, left, 0.5 * tol, spec.max_depth) +
                        simpson_step(st, m, b, fm, frm, fb, right, 0.5 * tol, spec.max_depth);
  if (st.exhausted) {
    throw AccuracyError("adaptive Simpson did not converge within max_depth", result);
  }
  return result;
}

double gauss_legendre_composite(const std::function<double(double)>& g, double a, double b,
                                const QuadratureSpec& spec) {
  static const GaussLegendreRule rule = gauss_legendre_rule(16);
  auto panels = [&](long n) {
    const double h = (b - a) / static_cast<double>(n);
    double sum = 0.0;
    double comp = 0.0;
    for (long p = 0; p < n; ++p) {
      const double c = a + (static_cast<double>(p) + 0.5) * h;
      double s = 0.0;
      for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * g(c + 0.5 * h * rule.nodes[i]);
      const double y = 0.5 * h * s - comp;
      const double t = sum + y;
      comp = (t - sum) - y;
      sum = t;
    }
    return sum;
  };
  double prev = panels(1);
  const int max_doublings = std::min(spec.max_depth, 22);
  for (int k = 1; k <= max_doublings; ++k) {
    const double cur = panels(1L << k);
    if (std::fabs(cur - prev) <= spec.abs_tol) return cur;
    prev = cur;
  }
  throw AccuracyError("composite Gauss-Legendre did not converge", prev);
}

}  // namespace

GaussLegendreRule gauss_legendre_rule(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double x = std::cos(std::numbers::pi_v<long double> * (i + 0.75L) / (n + 0.5L));
    long double dp = 0.0L;
    for (int it = 0; it < 100; ++it) {
      long double p0 = 1.0L;
      long double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2.0L * k - 1.0L) * x * p1 - (k - 1.0L) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0L);
      const long double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-19L) break;
    }
    const long double w = 2.0L / ((1.0L - x * x) * dp * dp);
    rule.nodes[i] = static_cast<double>(-x);
    rule.nodes[n - 1 - i] = static_cast<double>(x);
    rule.weights[i] = rule.weights[n - 1 - i] = static_cast<double>(w);
  }
  return rule;
}

double integrate(const std::function<double(double)>& g, double a, double b, const QuadratureSpec& spec) {
  spec.validate();
  if (a == b) return 0.0;
  if (spec.method == QuadratureMethod::gauss_legendre_composite) return gauss_legendre_composite(g, a, b, spec);
  return adaptive_simpson(g, a, b, spec);
}

namespace {

void check_F_domain(const NormForm& f, double T) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw DomainError("F(T) needs finite T >= 0");
  const double sing = singularity_bound(f);
  if (std::isfinite(sing) && T >= sing - 1e-6) {
    throw DomainError("T = " + std::to_string(T) + " is at or beyond the singularity " + std::to_string(sing) +
                      " of f(1,t) for f = " + f.serialize());
  }
}

double F_integrand(const NormForm& f, double t) {
  const double v = dehomogenize(f, t);
  if (f.degree() == 2) return 1.0 / v;
  return std::pow(v, -2.0 / f.degree());
}

}  // namespace

double integrate_F(const NormForm& f, double T, const QuadratureSpec& spec) {
  check_F_domain(f, T);
  if (T == 0.0) return 0.0;
  return integrate([&f](double t) { return F_integrand(f, t); }, 0.0, T, spec);
}

double closed_F_quadratic(std::int64_t d, double T) {
  if (d == 0) throw DomainError("closed_F_quadratic needs d != 0");
  const double r = std::sqrt(std::fabs(static_cast<double>(d)));
  if (d < 0) return std::atan(T * r) / r;
  if (T * r >= 1.0) throw DomainError("closed_F_quadratic: T sqrt(d) must be below 1 for d > 0");
  return std::atanh(T * r) / r;
}

double invert_F(const NormForm& f, double u, const QuadratureSpec& spec, double t_cap) {
  spec.validate();
  const double sing = singularity_bound(f);
  double t_max = std::isfinite(sing) ? sing - 1e-6 : 1e6;
  if (!std::isnan(t_cap)) t_max = std::min(t_max, t_cap);
  if (!(u >= 0.0)) throw DomainError("invert_F needs u >= 0");
  if (u == 0.0) return 0.0;

  QuadratureSpec inner = spec;
  inner.abs_tol = spec.abs_tol / 4.0;
  auto F = [&](double t) { return integrate_F(f, t, inner); };

  double hi = std::min(1.0, t_max);
  double f_hi = F(hi);
  while (f_hi < u && hi < t_max) {
    hi = std::min(2.0 * hi, t_max);
    f_hi = F(hi);
  }
  if (f_hi < u - spec.abs_tol) {
    throw DomainError("invert_F: u = " + std::to_string(u) + " exceeds F(t_max) = " + std::to_string(f_hi));
  }
  if (std::fabs(f_hi - u) <= 0.5 * spec.abs_tol) return hi;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return mid;
    const double fm = F(mid);
    if (std::fabs(fm - u) <= 0.5 * spec.abs_tol) return mid;
    (fm < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> decile_cuts(const NormForm& f, double cap, int k, const QuadratureSpec& spec) {
  if (k < 2) throw DomainError("decile_cuts needs k >= 2");
  const double sing = singularity_bound(f);
  if (!(cap > 0.0) || (std::isfinite(sing) && cap > sing - 1e-6)) {
    throw DomainError("decile_cuts cap must lie in (0, singularity - 1e-6]");
  }
  const double F_cap = integrate_F(f, cap, spec);
  std::vector<double> cuts;
  for (int j = 1; j < k; ++j) {
    const double u = static_cast<double>(j) / k;
    if (u > F_cap) break;
    const double t = invert_F(f, u, spec, cap);
    if (t > cap) break;
    const double rounded = std::round(t * 1e4) / 1e4;
    if (rounded > cap) break;
    if (!cuts.empty() && rounded <= cuts.back()) continue;
    cuts.push_back(rounded);
  }
  return cuts;
}

double kernel(KernelKind kind, double x) {
  if (!(std::fabs(x) <= 50.0)) throw DomainError("kernel argument must satisfy |x| <= 50");
  const double ax = std::fabs(x);
  if (ax < 1e-3) {
    const double x2 = x * x;
    const double sign = kind == KernelKind::circular ? 1.0 : -1.0;
    return 1.0 / 3.0 + x2 * (sign / 10.0 + x2 * (17.0 / 840.0 + x2 * sign * 29.0 / 8400.0));
  }
  const long double lx = ax;
  if (kind == KernelKind::circular) {
    const double m = std::round(x / std::numbers::pi);
    if (m != 0.0 && std::fabs(x - m * std::numbers::pi) < 1e-9) {
      throw PoleError("circular kernel has a pole at nonzero multiples of pi");
    }
    const long double s = std::sin(lx);
    const long double c = std::cos(lx);
    return static_cast<double>((lx - s * c) / (2.0L * s * s * s));
  }
  const long double s = std::sinh(lx);
  const long double c = std::cosh(lx);
  return static_cast<double>((s * c - lx) / (2.0L * s * s * s));
}

namespace {

void check_theta(KernelKind kind, double theta) {
  if (!(theta >= 0.0)) throw DomainError("pair kernel integral needs theta >= 0");
  if (kind == KernelKind::circular && !(theta < std::numbers::pi / 2)) {
    throw DomainError("circular pair kernel integral needs theta < pi/2");
  }
  if (kind == KernelKind::hyperbolic && !(theta <= 20.0)) {
    throw DomainError("hyperbolic pair kernel integral needs theta <= 20");
  }
}

}  // namespace

double D_kernel_integral(KernelKind kind, double theta, const QuadratureSpec& spec) {
  check_theta(kind, theta);
  if (theta == 0.0) return 0.0;
  return integrate([=](double x) { return 2.0 * (theta - x) * kernel(kind, x); }, 0.0, theta, spec);
}

double cone_square_integral(KernelKind kind, double lo, double hi, const QuadratureSpec& spec) {
  if (!(lo >= 0.0 && hi >= lo)) throw DomainError("cone_square_integral needs 0 <= lo <= hi");
  check_theta(kind, hi);
  if (lo == 0.0) return D_kernel_integral(kind, hi, spec);
  // Strip [0, lo] x [lo, hi] as a function of x = alpha - beta in (0, hi).
  auto weight = [=](double x) { return std::max(0.0, std::min(lo, hi - x) - std::max(0.0, lo - x)); };
  std::vector<double> knots{0.0, lo, hi - lo, hi};
  std::sort(knots.begin(), knots.end());
  QuadratureSpec piece = spec;
  piece.abs_tol = spec.abs_tol / 4.0;
  double strip = 0.0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    if (knots[i + 1] > knots[i]) {
      strip += integrate([&](double x) { return weight(x) * kernel(kind, x); }, knots[i], knots[i + 1], piece);
    }
  }
  return D_kernel_integral(kind, hi, spec) - D_kernel_integral(kind, lo, spec) - 2.0 * strip;
}

double zeta_continuous_single(const NormForm& f, double s, double T, const QuadratureSpec& spec) {
  const double ns = f.degree() * s;
  if (!(ns > 1.0)) throw DivergenceError("continuous cone zeta diverges for n*s <= 1");
  return integrate_F(f, T, spec) / (ns - 1.0);
}

double zeta_continuous_double_quadratic(KernelKind kind, double theta, const QuadratureSpec& spec) {
  return kDoubleZetaRadialConstant * D_kernel_integral(kind, theta, spec);
}

}  // namespace normprimes
