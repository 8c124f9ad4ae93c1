#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace normprimes {

using i128 = __int128;
using u128 = unsigned __int128;

std::string to_string(i128 v);

inline constexpr int kMaxDegree = 8;
inline constexpr std::int64_t kMaxCoefficient = 1'000'000;
inline constexpr std::int64_t kMaxEvalCoordinate = std::int64_t{1} << 20;

// Monic homogeneous binary form
//   f(x, y) = x^n + a1 x^(n-1) y + ... + an y^n,   2 <= n <= 8.
//
// Construction rejects forms that are visibly reducible: the discriminant
// test is exact for n = 2 and the rational-root test is exact for n = 3.
// For n >= 4 only the rational-root screen runs and the form is recorded as
// irreducible by assertion.
class NormForm {
 public:
  /// `tail` holds a1..an; the leading coefficient is fixed to 1.
  explicit NormForm(std::vector<std::int64_t> tail);

  /// Parses "1,a1,...,an".
  static NormForm parse(std::string_view text);

  int degree() const noexcept { return static_cast<int>(tail_.size()); }
  /// a1..an (the leading 1 is implicit).
  std::span<const std::int64_t> tail() const noexcept { return tail_; }
  /// Coefficient of x^(n-i) y^i, i = 0..n.
  std::int64_t coefficient(int i) const noexcept { return i == 0 ? 1 : tail_[i - 1]; }

  /// True when irreducibility over Q was proven at construction.
  bool irreducibility_certified() const noexcept { return certified_; }
  std::string_view irreducibility_note() const noexcept;

  std::string serialize() const;

  friend bool operator==(const NormForm&, const NormForm&) = default;

 private:
  std::vector<std::int64_t> tail_;
  bool certified_ = false;
};

/// Exact f(a, b). Throws RangeError (naming a and b) when |a| or |b|
/// exceeds 2^20 or an intermediate leaves the signed 128-bit range.
i128 eval_form(const NormForm& f, std::int64_t a, std::int64_t b);

/// f(1, t).
double dehomogenize(const NormForm& f, double t);

/// Smallest t in (0, 1e6] with f(1, t) = 0, located to 1e-12; +infinity
/// when f(1, t) stays positive on that interval.
double singularity_bound(const NormForm& f);

/// Real roots of the polynomial sum c[i] t^i inside [lo, hi], ascending.
std::vector<double> real_roots(std::span<const double> c, double lo, double hi);

// The order Z[sqrt(d)] with norm a^2 - d b^2.
class QuadraticRing {
 public:
  explicit QuadraticRing(std::int64_t d);

  /// Parses "d=<integer>".
  static QuadraticRing parse(std::string_view text);

  std::int64_t d() const noexcept { return d_; }
  bool imaginary() const noexcept { return d_ < 0; }
  double sqrt_abs_d() const noexcept;

  i128 norm(i128 a, i128 b) const noexcept { return a * a - static_cast<i128>(d_) * b * b; }
  NormForm norm_form() const;
  std::string serialize() const;

  friend bool operator==(const QuadraticRing&, const QuadraticRing&) = default;

 private:
  std::int64_t d_;
};

bool is_squarefree(std::int64_t n);

}  // namespace normprimes
