#include <doctest.h>

#include <cmath>
#include <limits>

#include "normprimes/errors.hpp"
#include "normprimes/polyform.hpp"
#include "oracles.hpp"

using namespace normprimes;

TEST_CASE("parse and serialize round trip") {
  const auto f = NormForm::parse("1, 0, 0, 2");
  CHECK(f.degree() == 3);
  CHECK(f.coefficient(0) == 1);
  CHECK(f.coefficient(3) == 2);
  CHECK(NormForm::parse(f.serialize()) == f);
  CHECK(f.irreducibility_certified());
}

TEST_CASE("parse rejects bad input") {
  CHECK_THROWS_AS(NormForm::parse("2,0,1"), DomainError);
  CHECK_THROWS_AS(NormForm::parse("1,x,1"), ConfigError);
  CHECK_THROWS_AS(NormForm::parse("1,1"), ConfigError);
  CHECK_THROWS_AS(NormForm({0, 0, 0, 0, 0, 0, 0, 0, 1}), DomainError);
  CHECK_THROWS_AS(NormForm({2000000, 1}), DomainError);
  CHECK_THROWS_AS(NormForm({0, 0, 0}), DomainError);
}

TEST_CASE("visibly reducible forms are rejected") {
  CHECK_THROWS_AS(NormForm({0, -1}), DomainError);     // x^2 - y^2
  CHECK_THROWS_AS(NormForm({3, 2}), DomainError);      // (x+y)(x+2y)
  CHECK_THROWS_AS(NormForm({0, 0, -8}), DomainError);  // x^3 - 8y^3
  CHECK_THROWS_AS(NormForm({0, 0, 27}), DomainError);  // x^3 + 27y^3
  CHECK_NOTHROW(NormForm({0, 1}));
  CHECK_NOTHROW(NormForm({0, 0, 0, 11}));
  CHECK_FALSE(NormForm({0, 0, 0, 11}).irreducibility_certified());
}

TEST_CASE("eval matches the expanded-power oracle") {
  const std::vector<std::vector<std::int64_t>> forms = {{1, 0, 2}, {1, 0, 0, 2}, {1, 3, 0, 0, 0, 1},
                                                        {1, 3, 0, 0, 0, 0, 1}, {1, -5, 7, -11, 13}};
  for (const auto& c : forms) {
    const NormForm f(std::vector<std::int64_t>(c.begin() + 1, c.end()));
    for (std::int64_t a = -7; a <= 40; a += 3)
      for (std::int64_t b = -9; b <= 31; b += 4) CHECK(eval_form(f, a, b) == oracle::eval(c, a, b));
  }
  const NormForm f({0, 1});
  CHECK(eval_form(f, kMaxEvalCoordinate, kMaxEvalCoordinate) == oracle::eval({1, 0, 1}, 1 << 20, 1 << 20));
}

TEST_CASE("eval reports range errors with the coordinates") {
  const NormForm f({0, 0, 0, 0, 0, 0, 0, 1});
  CHECK_THROWS_AS(eval_form(f, kMaxEvalCoordinate + 1, 1), RangeError);
  try {
    eval_form(f, kMaxEvalCoordinate, kMaxEvalCoordinate);
    FAIL("expected overflow");
  } catch (const RangeError& e) {
    CHECK(std::string(e.what()).find("1048576") != std::string::npos);
  }
}

TEST_CASE("dehomogenize agrees with eval at integer slopes") {
  const NormForm f({3, 0, 0, 0, 1});
  for (int t = 0; t < 6; ++t) CHECK(dehomogenize(f, t) == doctest::Approx(static_cast<double>(eval_form(f, 1, t))));
  CHECK(dehomogenize(f, 0.5) == doctest::Approx(1 + 1.5 + 1.0 / 32));
}

TEST_CASE("singularity bound") {
  CHECK(std::isinf(singularity_bound(NormForm({0, 1}))));
  CHECK(singularity_bound(NormForm({0, -2})) == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(singularity_bound(NormForm({0, 0, -2})) == doctest::Approx(std::cbrt(0.5)).epsilon(1e-12));
}

TEST_CASE("real roots of a polynomial") {
  const std::vector<double> c = {6, -11, 6, -1};  // -(t-1)(t-2)(t-3)
  const auto r = real_roots(c, 0, 10);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == doctest::Approx(1));
  CHECK(r[1] == doctest::Approx(2));
  CHECK(r[2] == doctest::Approx(3));
  CHECK(real_roots(c, 1.5, 2.5).size() == 1);
}

TEST_CASE("squarefree") {
  CHECK(is_squarefree(1));
  CHECK(is_squarefree(-1));
  CHECK(is_squarefree(30));
  CHECK_FALSE(is_squarefree(12));
  CHECK_FALSE(is_squarefree(-18));
  CHECK_FALSE(is_squarefree(0));
}

TEST_CASE("quadratic ring") {
  const auto r = QuadraticRing::parse("d=-7");
  CHECK(r.imaginary());
  CHECK(r.norm(3, 2) == 9 + 28);
  CHECK(r.norm_form() == NormForm({0, 7}));
  CHECK(QuadraticRing(13).norm(18, 5) == -1);
  CHECK_THROWS_AS(QuadraticRing(1), DomainError);
  CHECK_THROWS_AS(QuadraticRing(8), DomainError);
  CHECK_THROWS_AS(QuadraticRing(0), DomainError);
  CHECK_THROWS_AS(QuadraticRing::parse("7"), ConfigError);
}

TEST_CASE("property: eval is homogeneous of degree n") {
  const NormForm f({3, 0, 0, 0, 1});
  for (std::int64_t a = 1; a < 20; a += 3)
    for (std::int64_t b = 1; b < 20; b += 5) CHECK(eval_form(f, 2 * a, 2 * b) == 32 * eval_form(f, a, b));
}
