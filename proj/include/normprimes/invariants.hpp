#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "normprimes/lattice.hpp"
#include "normprimes/polyform.hpp"

namespace normprimes {

// Smallest unit x + y sqrt(d) > 1 of Z[sqrt d], as decimal strings since
// y overflows 64 bits for many d below 10^6.
struct FundamentalUnit {
  std::string x;
  std::string y;
  int norm = 1;  // x^2 - d y^2, +1 or -1
};

struct FieldInvariants {
  std::int64_t d = 0;
  std::int64_t h = 0;
  int roots_of_unity = 2;  // 4 for d = -1
  std::optional<FundamentalUnit> unit;
  double regulator = 0.0;

  std::string csv_header() const;
  std::string csv_row() const;
};

/// Kronecker symbol (D/n) for n >= 1.
int kronecker(std::int64_t D, std::int64_t n);

/// Class number of discriminant 4d by reduced forms: counting for d < 0,
/// cycles of reduced indefinite forms (narrow classes, halved when the unit
/// has norm +1) for d > 0.
std::int64_t class_number_forms(std::int64_t d);

/// sum of (4d/n)/n over n <= terms, truncated at a multiple of the period.
double l_one_truncated(std::int64_t d, std::uint64_t terms = 1'000'000);

/// Class number from the Dirichlet formula with the truncated L(1, chi).
/// Throws ConsistencyError when the estimate is farther than 0.2 from an
/// integer.
std::int64_t class_number_analytic(std::int64_t d);

/// Period-end convergent of the continued fraction of sqrt(d), d > 1.
FundamentalUnit fundamental_unit(std::int64_t d);

/// ln(x + y sqrt d), evaluated in 50-digit arithmetic.
double regulator(std::int64_t d);

/// Both class-number methods run and must agree (ConsistencyError
/// otherwise).
FieldInvariants field_invariants(std::int64_t d);

// Residues at s = 1 of the cone zeta and of the cone double zeta on the
// diagonal, estimated from sums truncated at N <= B and taken at s = 1 + eps.
// With g(eps) = (1 - B^-eps) / eps the truncated sums behave like
//   S1(eps) = r g(eps) + c0 + c1 eps,
//   S2(eps) = (K / 2) g(eps)^2 + k1 g(eps) + k0,
// and the three eps values determine r (single) and K (double) exactly.
// The per-eps columns are the one-term estimates S1 / g and 2 S2 / g^2.
struct ResidueEstimate {
  static constexpr std::array<double, 3> kEpsilons{0.2, 0.1, 0.05};
  std::array<double, 3> single_sum{};
  std::array<double, 3> double_sum{};
  std::array<double, 3> single_raw{};
  std::array<double, 3> double_raw{};
  double single = 0.0;
  double dbl = 0.0;
  bool unstable = false;
  std::string warning;

  /// double / single^2; NaN for an empty cone.
  double identity_ratio() const;
};

/// Solves the 3x3 system sum_k m[i][k] x[k] = rhs[i] by Gaussian
/// elimination with partial pivoting.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> rhs);

ResidueEstimate residue_estimate(const QuadraticRing& ring, const Cone& cone, std::uint64_t B,
                                 const ExecOptions& opts = {});

}  // namespace normprimes
