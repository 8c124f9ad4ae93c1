#include <doctest.h>

#include <cmath>
#include <numbers>

#include "normprimes/errors.hpp"
#include "normprimes/quadrature.hpp"
#include "oracles.hpp"

using namespace normprimes;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("gauss legendre rule integrates polynomials exactly") {
  const auto rule = gauss_legendre_rule(12);
  for (int k = 0; k < 24; ++k) {
    double s = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * std::pow(rule.nodes[i], k);
    CHECK(s == doctest::Approx(k % 2 ? 0.0 : 2.0 / (k + 1)).epsilon(1e-13));
  }
}

TEST_CASE("integrate with both methods") {
  QuadratureSpec spec;
  spec.abs_tol = 1e-12;
  CHECK(integrate([](double x) { return std::exp(x); }, 0, 1, spec) == doctest::Approx(std::exp(1.0) - 1).epsilon(1e-11));
  spec.method = QuadratureMethod::gauss_legendre_composite;
  CHECK(integrate([](double x) { return std::cos(x); }, 0, 2, spec) == doctest::Approx(std::sin(2.0)).epsilon(1e-11));
}

TEST_CASE("integrate reports the best estimate when it gives up") {
  QuadratureSpec spec;
  spec.abs_tol = 1e-15;
  spec.max_depth = 4;
  try {
    integrate([](double x) { return std::sqrt(x); }, 0, 1, spec);
    FAIL("expected AccuracyError");
  } catch (const AccuracyError& e) {
    CHECK(e.best_estimate() == doctest::Approx(2.0 / 3).epsilon(1e-2));
  }
  spec.max_depth = 2;
  CHECK_THROWS_AS(spec.validate(), DomainError);
}

TEST_CASE("closed form F agrees with quadrature") {
  for (std::int64_t d : {-1, -2, -7, -13}) {
    const QuadraticRing r(d);
    for (double T : {0.1, 0.7, 3.0}) CHECK(integrate_F(r.norm_form(), T) == doctest::Approx(closed_F_quadratic(d, T)).epsilon(1e-9));
  }
  for (std::int64_t d : {2, 3, 13}) {
    const QuadraticRing r(d);
    for (double T : {0.05, 0.2, 0.9 / std::sqrt(double(d))})
      CHECK(integrate_F(r.norm_form(), T) == doctest::Approx(closed_F_quadratic(d, T)).epsilon(1e-9));
  }
  CHECK(closed_F_quadratic(-1, 1.0) == doctest::Approx(kPi / 4));
  CHECK_THROWS_AS(closed_F_quadratic(2, 1.0), DomainError);
}

TEST_CASE("F is rejected at or past the singularity") {
  const NormForm f({0, 0, -2});
  CHECK_THROWS_AS(integrate_F(f, 0.9), DomainError);
  CHECK_THROWS_AS(integrate_F(NormForm({0, 1}), -1.0), DomainError);
}

TEST_CASE("invert F round trip") {
  const NormForm f({0, 0, 2});
  for (double T : {0.05, 0.3, 1.0, 2.5}) {
    const double u = integrate_F(f, T);
    CHECK(invert_F(f, u) == doctest::Approx(T).epsilon(1e-8));
  }
  CHECK(invert_F(f, 0.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(invert_F(f, 100.0), DomainError);
}

TEST_CASE("decile cuts of the Gaussian norm are rounded tangents") {
  const auto cuts = decile_cuts(NormForm({0, 1}), 1.0, 10);
  REQUIRE(cuts.size() == 7);
  for (int j = 1; j <= 7; ++j) CHECK(cuts[j - 1] == doctest::Approx(std::round(std::tan(j / 10.0) * 1e4) / 1e4));
  CHECK_THROWS_AS(decile_cuts(NormForm({0, 1}), 1.0, 1), DomainError);
  CHECK_THROWS_AS(decile_cuts(NormForm({0, -2}), 0.8, 10), DomainError);
}

TEST_CASE("property: decile cuts are strictly increasing and capped") {
  for (const auto& tail : std::vector<std::vector<std::int64_t>>{{0, 0, 2}, {0, 0, 0, 11}, {3, 0, 0, 0, 1}}) {
    const NormForm f(tail);
    const auto cuts = decile_cuts(f, 1.0, 10);
    for (std::size_t i = 1; i < cuts.size(); ++i) CHECK(cuts[i] > cuts[i - 1]);
    if (!cuts.empty()) CHECK(cuts.back() <= 1.0);
  }
}

TEST_CASE("kernel matches the oracle") {
  for (double x = -1.4; x <= 1.4; x += 0.0137) {
    CHECK(kernel(KernelKind::circular, x) == doctest::Approx(oracle::pair_kernel(true, x)).epsilon(1e-12));
    CHECK(kernel(KernelKind::hyperbolic, x) == doctest::Approx(oracle::pair_kernel(false, x)).epsilon(1e-12));
  }
  for (double x : {1e-5, 5e-4, 2e-3, 0.04}) {
    CHECK(kernel(KernelKind::circular, x) == doctest::Approx(oracle::pair_kernel(true, x)).epsilon(1e-13));
    CHECK(kernel(KernelKind::hyperbolic, x) == doctest::Approx(oracle::pair_kernel(false, x)).epsilon(1e-13));
  }
  CHECK(kernel(KernelKind::circular, 0.0) == doctest::Approx(1.0 / 3));
  CHECK(kernel(KernelKind::hyperbolic, 0.0) == doctest::Approx(1.0 / 3));
  CHECK_THROWS_AS(kernel(KernelKind::circular, kPi), PoleError);
  CHECK_THROWS_AS(kernel(KernelKind::hyperbolic, 51.0), DomainError);
}

TEST_CASE("property: kernel is even and continuous across the series switch") {
  for (double x : {0.3, 0.9, 1.2}) {
    CHECK(kernel(KernelKind::circular, x) == kernel(KernelKind::circular, -x));
    CHECK(kernel(KernelKind::hyperbolic, x) == kernel(KernelKind::hyperbolic, -x));
  }
  const double below = kernel(KernelKind::circular, std::nextafter(1e-3, 0.0));
  const double above = kernel(KernelKind::circular, 1e-3);
  CHECK(below == doctest::Approx(above).epsilon(1e-12));
}

TEST_CASE("D matches a tensor Gauss-Legendre square integral") {
  for (double theta : {0.05, kPi / 36, kPi / 4, 1.2}) {
    const double ref = oracle::tensor_gl([](double a, double b) { return oracle::pair_kernel(true, a - b); }, 0, theta, 4);
    CHECK(D_kernel_integral(KernelKind::circular, theta) == doctest::Approx(ref).epsilon(1e-9));
  }
  for (double theta : {0.1, 1.3169578969248166, 3.0}) {
    const double ref = oracle::tensor_gl([](double a, double b) { return oracle::pair_kernel(false, a - b); }, 0, theta, 4);
    CHECK(D_kernel_integral(KernelKind::hyperbolic, theta) == doctest::Approx(ref).epsilon(1e-9));
  }
  CHECK(D_kernel_integral(KernelKind::circular, 0.0) == 0.0);
  CHECK_THROWS_AS(D_kernel_integral(KernelKind::circular, kPi / 2), DomainError);
  CHECK_THROWS_AS(D_kernel_integral(KernelKind::hyperbolic, 21.0), DomainError);
}

TEST_CASE("property: cone square integral is translation invariant") {
  for (int k = 1; k < 12; ++k) {
    const double lo = kPi / 36, hi = (k + 1) * kPi / 36;
    CHECK(cone_square_integral(KernelKind::circular, lo, hi) ==
          doctest::Approx(D_kernel_integral(KernelKind::circular, hi - lo)).epsilon(1e-9));
    CHECK(cone_square_integral(KernelKind::hyperbolic, 0.2, 0.2 + k * 0.1) ==
          doctest::Approx(D_kernel_integral(KernelKind::hyperbolic, k * 0.1)).epsilon(1e-9));
  }
  const double ref = oracle::tensor_gl([](double a, double b) { return oracle::pair_kernel(true, a - b); }, 0.3, 0.9, 4);
  CHECK(cone_square_integral(KernelKind::circular, 0.3, 0.9) == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("property: D is increasing and superlinear") {
  double prev = 0;
  for (int k = 1; k <= 17; ++k) {
    const double cur = D_kernel_integral(KernelKind::circular, k * kPi / 36);
    CHECK(cur > prev);
    CHECK(cur >= (k * kPi / 36) * (k * kPi / 36) / 3 - 1e-12);
    prev = cur;
  }
}

TEST_CASE("continuous zeta values") {
  const NormForm g({0, 1});
  CHECK(zeta_continuous_single(g, 2.0, 1.0) == doctest::Approx(kPi / 4 / 3));
  CHECK_THROWS_AS(zeta_continuous_single(g, 0.5, 1.0), DivergenceError);
  CHECK(zeta_continuous_double_quadratic(KernelKind::circular, 0.4) ==
        doctest::Approx(D_kernel_integral(KernelKind::circular, 0.4) / 6));
  CHECK(kDoubleZetaRadialConstant == doctest::Approx(1.0 / 6));
  CHECK(kDoubleZetaPrintedConstant == doctest::Approx(1.0 / 8));
}
