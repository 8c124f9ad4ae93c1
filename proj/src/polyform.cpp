#include "normprimes/polyform.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

#include "normprimes/errors.hpp"

namespace normprimes {

std::string to_string(i128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  u128 u = neg ? u128(0) - static_cast<u128>(v) : static_cast<u128>(v);
  std::string out;
  while (u != 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (neg) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

std::int64_t parse_int(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("not an integer: '" + std::string(s) + "'");
  }
  return v;
}

bool is_perfect_square(i128 v) {
  if (v < 0) return false;
  auto r = static_cast<i128>(std::sqrt(static_cast<long double>(v)));
  while (r * r > v) --r;
  while ((r + 1) * (r + 1) <= v) ++r;
  return r * r == v;
}

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % m);
}

// f(r, 1) reduced mod a prime, used to certify rational roots without
// overflowing when |r| is large.
std::uint64_t eval_at_root_mod(std::span<const std::int64_t> tail, std::int64_t r, std::uint64_t p) {
  auto red = [p](std::int64_t v) {
    const auto m = static_cast<std::int64_t>(p);
    std::int64_t x = v % m;
    return static_cast<std::uint64_t>(x < 0 ? x + m : x);
  };
  std::uint64_t acc = 1;
  const std::uint64_t rr = red(r);
  for (std::int64_t c : tail) acc = (mulmod(acc, rr, p) + red(c)) % p;
  return acc;
}

bool has_integer_root(std::span<const std::int64_t> tail) {
  const std::int64_t an = tail.back();
  const std::int64_t m = std::llabs(an);
  auto is_root = [&](std::int64_t r) {
    long double v = 1.0L;
    long double scale = 1.0L;
    for (std::int64_t c : tail) {
      v = v * r + c;
      scale = scale * std::fabs(static_cast<long double>(r)) + std::fabs(static_cast<long double>(c));
    }
    if (std::fabs(v) > 1e-9L * scale) return false;
    return eval_at_root_mod(tail, r, 2305843009213693951ULL) == 0 &&
           eval_at_root_mod(tail, r, 1000000000000000003ULL) == 0;
  };
  for (std::int64_t q = 1; q * q <= m; ++q) {
    if (m % q != 0) continue;
    for (std::int64_t r : {q, -q, m / q, -(m / q)}) {
      if (is_root(r)) return true;
    }
  }
  return false;
}

long double poly_eval(std::span<const double> c, long double t) {
  long double r = 0.0L;
  for (std::size_t i = c.size(); i-- > 0;) r = r * t + c[i];
  return r;
}

}  // namespace

NormForm::NormForm(std::vector<std::int64_t> tail) : tail_(std::move(tail)) {
  const int n = degree();
  if (n < 2 || n > kMaxDegree) {
    throw DomainError("norm form degree must be in [2, 8], got " + std::to_string(n));
  }
  for (std::int64_t c : tail_) {
    if (std::llabs(c) > kMaxCoefficient) {
      throw DomainError("norm form coefficient " + std::to_string(c) + " exceeds 1e6 in magnitude");
    }
  }
  if (tail_.back() == 0) {
    throw DomainError("norm form " + serialize() + " is divisible by y");
  }
  if (n == 2) {
    const i128 disc = static_cast<i128>(tail_[0]) * tail_[0] - 4 * static_cast<i128>(tail_[1]);
    if (is_perfect_square(disc)) {
      throw DomainError("quadratic form " + serialize() + " is reducible (square discriminant)");
    }
    certified_ = true;
    return;
  }
  if (has_integer_root(tail_)) {
    throw DomainError("norm form " + serialize() + " has a rational linear factor");
  }
  certified_ = (n == 3);
}

NormForm NormForm::parse(std::string_view text) {
  std::vector<std::int64_t> all;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    all.push_back(parse_int(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (all.size() < 3) throw ConfigError("norm form needs at least 3 coefficients: '" + std::string(text) + "'");
  if (all.front() != 1) throw DomainError("norm forms must be monic in x; got leading coefficient " + std::to_string(all.front()));
  return NormForm(std::vector<std::int64_t>(all.begin() + 1, all.end()));
}

std::string_view NormForm::irreducibility_note() const noexcept {
  return certified_ ? "irreducibility certified" : "irreducibility asserted by user";
}

std::string NormForm::serialize() const {
  std::string s = "1";
  for (std::int64_t c : tail_) s += "," + std::to_string(c);
  return s;
}

i128 eval_form(const NormForm& f, std::int64_t a, std::int64_t b) {
  auto fail = [&] {
    return RangeError("eval_form(" + f.serialize() + ") overflows at (a,b) = (" + std::to_string(a) + "," +
                      std::to_string(b) + ")");
  };
  if (std::llabs(a) > kMaxEvalCoordinate || std::llabs(b) > kMaxEvalCoordinate) throw fail();
  i128 r = 1;
  i128 bp = 1;
  for (int i = 1; i <= f.degree(); ++i) {
    i128 term;
    if (__builtin_mul_overflow(bp, static_cast<i128>(b), &bp)) throw fail();
    if (__builtin_mul_overflow(bp, static_cast<i128>(f.coefficient(i)), &term)) throw fail();
    if (__builtin_mul_overflow(r, static_cast<i128>(a), &r)) throw fail();
    if (__builtin_add_overflow(r, term, &r)) throw fail();
  }
  return r;
}

double dehomogenize(const NormForm& f, double t) {
  const double rt = std::nearbyint(t);
  if (rt == t && std::fabs(t) <= static_cast<double>(kMaxEvalCoordinate)) {
    try {
      return static_cast<double>(eval_form(f, 1, static_cast<std::int64_t>(rt)));
    } catch (const RangeError&) {
    }
  }
  long double r = 0.0L;
  for (int i = f.degree(); i >= 0; --i) r = r * t + f.coefficient(i);
  return static_cast<double>(r);
}

std::vector<double> real_roots(std::span<const double> c, double lo, double hi) {
  std::size_t n = c.size();
  while (n > 0 && c[n - 1] == 0.0) --n;
  if (n <= 1) return {};
  c = c.first(n);
  if (n == 2) {
    const double r = -c[0] / c[1];
    if (r >= lo && r <= hi) return {r};
    return {};
  }
  std::vector<double> deriv(n - 1);
  for (std::size_t i = 1; i < n; ++i) deriv[i - 1] = static_cast<double>(i) * c[i];

  std::vector<double> knots{lo};
  for (double x : real_roots(deriv, lo, hi)) {
    if (x > knots.back()) knots.push_back(x);
  }
  if (hi > knots.back()) knots.push_back(hi);

  std::vector<double> roots;
  auto push = [&](double x) {
    if (roots.empty() || std::fabs(x - roots.back()) > 1e-12 * std::max(1.0, std::fabs(x))) roots.push_back(x);
  };
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    long double a = knots[k];
    long double b = knots[k + 1];
    long double fa = poly_eval(c, a);
    const long double fb = poly_eval(c, b);
    if (fa == 0.0L) {
      push(static_cast<double>(a));
      continue;
    }
    if ((fa < 0) == (fb < 0) || fb == 0.0L) continue;
    for (int it = 0; it < 200 && b - a > 1e-13L; ++it) {
      const long double m = 0.5L * (a + b);
      if (m == a || m == b) break;
      const long double fm = poly_eval(c, m);
      if (fm == 0.0L) {
        a = b = m;
        break;
      }
      if ((fm < 0) == (fa < 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    push(static_cast<double>(0.5L * (a + b)));
  }
  if (poly_eval(c, hi) == 0.0L) push(hi);
  return roots;
}

double singularity_bound(const NormForm& f) {
  std::vector<double> c(f.degree() + 1);
  for (int i = 0; i <= f.degree(); ++i) c[i] = static_cast<double>(f.coefficient(i));
  for (double r : real_roots(c, 0.0, 1e6)) {
    if (r > 0.0) return r;
  }
  return std::numeric_limits<double>::infinity();
}

bool is_squarefree(std::int64_t n) {
  std::uint64_t m = static_cast<std::uint64_t>(n < 0 ? -n : n);
  if (m == 0) return false;
  for (std::uint64_t p = 2; p * p <= m; ++p) {
    if (m % (p * p) == 0) return false;
    if (m % p == 0) m /= p;
  }
  return true;
}

QuadraticRing::QuadraticRing(std::int64_t d) : d_(d) {
  if (d == 0 || d == 1) throw DomainError("quadratic ring needs d not in {0, 1}");
  if (std::llabs(d) > kMaxCoefficient) throw DomainError("quadratic ring |d| must not exceed 1e6");
  if (!is_squarefree(d)) throw DomainError("d = " + std::to_string(d) + " is not squarefree");
}

QuadraticRing QuadraticRing::parse(std::string_view text) {
  if (text.substr(0, 2) != "d=") throw ConfigError("quadratic ring must be written d=<integer>");
  return QuadraticRing(parse_int(text.substr(2)));
}

double QuadraticRing::sqrt_abs_d() const noexcept { return std::sqrt(static_cast<double>(d_ < 0 ? -d_ : d_)); }

NormForm QuadraticRing::norm_form() const { return NormForm({0, -d_}); }

std::string QuadraticRing::serialize() const { return "d=" + std::to_string(d_); }

}  // namespace normprimes
