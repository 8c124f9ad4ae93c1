#include "normprimes/invariants.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "normprimes/errors.hpp"

namespace normprimes {

namespace mp = boost::multiprecision;

namespace {

void check_d(std::int64_t d) {
  if (d == 0 || d == 1 || std::llabs(d) > 1'000'000 || !is_squarefree(d))
    throw DomainError("d=" + std::to_string(d) + " must be squarefree, not 0 or 1, and |d| <= 10^6");
}

std::int64_t isqrt64(std::int64_t n) {
  auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

using Form = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

bool primitive(std::int64_t a, std::int64_t b, std::int64_t c) {
  return std::gcd(std::gcd(std::llabs(a), std::llabs(b)), std::llabs(c)) == 1;
}

std::int64_t imaginary_forms(std::int64_t disc) {
  const std::int64_t D = -disc;
  std::int64_t h = 0;
  for (std::int64_t a = 1; 3 * a * a <= D; ++a) {
    for (std::int64_t b = -a + 1; b <= a; ++b) {
      if (((b - disc) & 1) != 0) continue;
      const std::int64_t num = b * b - disc;
      if (num % (4 * a) != 0) continue;
      const std::int64_t c = num / (4 * a);
      if (c < a) continue;
      if (b < 0 && a == c) continue;
      if (primitive(a, b, c)) ++h;
    }
  }
  return h;
}

// Reduced indefinite forms satisfy 0 < b < s and s - b < 2|a| < s + b with
// s = sqrt(disc) irrational, so every comparison reduces to floor(s).
std::int64_t narrow_cycles(std::int64_t disc) {
  const std::int64_t fs = isqrt64(disc);
  std::set<Form> reduced;
  for (std::int64_t b = 1; b <= fs; ++b) {
    if (((b - disc) & 1) != 0) continue;
    const std::int64_t num = b * b - disc;  // = 4ac < 0
    for (std::int64_t aa = 1; 2 * aa - b <= fs; ++aa) {
      if (2 * aa + b <= fs) continue;
      if (num % (4 * aa) != 0) continue;
      for (std::int64_t a : {aa, -aa}) {
        const std::int64_t c = num / (4 * a);
        if (primitive(a, b, c)) reduced.insert({a, b, c});
      }
    }
  }
  auto rho = [&](const Form& f) {
    const auto [a, b, c] = f;
    const std::int64_t m = 2 * std::llabs(c);
    std::int64_t nb = ((-b) % m + m) % m;
    // largest nb' == -b (mod 2|c|) with nb' <= fs
    nb += ((fs - nb) / m) * m;
    if (nb > fs) nb -= m;
    const std::int64_t nc = (nb * nb - disc) / (4 * c);
    return Form{c, nb, nc};
  };
  std::int64_t cycles = 0;
  std::set<Form> seen;
  for (const auto& f : reduced) {
    if (seen.count(f)) continue;
    ++cycles;
    Form g = f;
    do {
      if (!reduced.count(g)) throw ConsistencyError("reduction cycle left the reduced set");
      seen.insert(g);
      g = rho(g);
    } while (g != f);
  }
  return cycles;
}

}  // namespace

int kronecker(std::int64_t D, std::int64_t n) {
  if (n < 1) throw DomainError("kronecker symbol needs n >= 1");
  int result = 1;
  while ((n & 1) == 0) {
    n >>= 1;
    if ((D & 1) == 0) return 0;
    const std::int64_t r = ((D % 8) + 8) % 8;
    if (r == 3 || r == 5) result = -result;
  }
  // Jacobi symbol (D/n) for odd n
  std::int64_t a = ((D % n) + n) % n;
  std::int64_t m = n;
  while (a != 0) {
    while ((a & 1) == 0) {
      a >>= 1;
      const std::int64_t r = m % 8;
      if (r == 3 || r == 5) result = -result;
    }
    std::swap(a, m);
    if (a % 4 == 3 && m % 4 == 3) result = -result;
    a %= m;
  }
  return m == 1 ? result : 0;
}

std::int64_t class_number_forms(std::int64_t d) {
  check_d(d);
  const std::int64_t disc = 4 * d;
  if (d < 0) return imaginary_forms(disc);
  const std::int64_t hplus = narrow_cycles(disc);
  return fundamental_unit(d).norm == 1 ? hplus / 2 : hplus;
}

// The tail beyond a whole number of periods is (mean partial character sum)/N
// to first order; adding it brings the error to O(|disc|^2 / N^2).
double l_one_truncated(std::int64_t d, std::uint64_t terms) {
  check_d(d);
  const std::int64_t disc = 4 * d;
  const auto period = static_cast<std::uint64_t>(std::llabs(disc));
  std::vector<int> chi(period);
  long double partial_mean = 0;
  long double partial = 0;
  for (std::uint64_t r = 0; r < period; ++r) {
    chi[r] = kronecker(disc, static_cast<std::int64_t>(r == 0 ? period : r));
  }
  for (std::uint64_t r = 1; r <= period; ++r) {
    partial += chi[r % period];
    partial_mean += partial;
  }
  partial_mean /= static_cast<long double>(period);
  const std::uint64_t N = std::max<std::uint64_t>(1, terms / period) * period;
  long double sum = 0;
  for (std::uint64_t n = N; n >= 1; --n) {
    const int c = chi[n % period];
    if (c != 0) sum += static_cast<long double>(c) / static_cast<long double>(n);
  }
  sum += partial_mean / static_cast<long double>(N);
  return static_cast<double>(sum);
}

std::int64_t class_number_analytic(std::int64_t d) {
  check_d(d);
  const double L = l_one_truncated(d);
  const double root = std::sqrt(static_cast<double>(4 * std::llabs(d)));
  double est = 0;
  if (d < 0) {
    const int w = d == -1 ? 4 : 2;
    est = w * root * L / (2.0 * std::numbers::pi);
  } else {
    est = root * L / (2.0 * regulator(d));
  }
  const double nearest = std::round(est);
  if (nearest < 1 || std::fabs(est - nearest) > 0.2) {
    std::ostringstream os;
    os << "class number estimate " << est << " for d=" << d << " is not near a positive integer";
    throw ConsistencyError(os.str());
  }
  return static_cast<std::int64_t>(nearest);
}

FundamentalUnit fundamental_unit(std::int64_t d) {
  check_d(d);
  if (d < 0) throw DomainError("fundamental unit requested for imaginary d=" + std::to_string(d));
  const std::int64_t a0 = isqrt64(d);
  std::int64_t m = 0, q = 1, a = a0;
  mp::cpp_int p_prev = 1, p = a0, q_prev = 0, qq = 1;
  int length = 0;
  for (;;) {
    m = q * a - m;
    q = (d - m * m) / q;
    a = (a0 + m) / q;
    ++length;
    if (a == 2 * a0) break;
    mp::cpp_int np = a * p + p_prev;
    mp::cpp_int nq = a * qq + q_prev;
    p_prev = p;
    p = np;
    q_prev = qq;
    qq = nq;
  }
  const mp::cpp_int norm = p * p - mp::cpp_int(d) * qq * qq;
  if (norm != 1 && norm != -1) throw ConsistencyError("continued fraction did not yield a unit");
  return FundamentalUnit{p.str(), qq.str(), norm == 1 ? 1 : -1};
}

double regulator(std::int64_t d) {
  const FundamentalUnit u = fundamental_unit(d);
  using F = mp::cpp_bin_float_50;
  const F x(u.x), y(u.y);
  const F eps = x + y * mp::sqrt(F(d));
  return static_cast<double>(mp::log(eps));
}

FieldInvariants field_invariants(std::int64_t d) {
  check_d(d);
  FieldInvariants out;
  out.d = d;
  out.roots_of_unity = d == -1 ? 4 : 2;
  if (d > 0) {
    out.unit = fundamental_unit(d);
    out.regulator = regulator(d);
  }
  const std::int64_t by_forms = class_number_forms(d);
  const std::int64_t by_l = class_number_analytic(d);
  if (by_forms != by_l)
    throw ConsistencyError("class number mismatch for d=" + std::to_string(d) + ": forms " +
                           std::to_string(by_forms) + ", analytic " + std::to_string(by_l));
  out.h = by_forms;
  return out;
}

std::string FieldInvariants::csv_header() const { return "d,h,unit_x,unit_y,regulator"; }

std::string FieldInvariants::csv_row() const {
  std::ostringstream os;
  os.precision(17);
  os << d << ',' << h << ',' << (unit ? unit->x : "") << ',' << (unit ? unit->y : "") << ',' << regulator;
  return os.str();
}

double ResidueEstimate::identity_ratio() const {
  if (single == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return dbl / (single * single);
}

std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> m, std::array<double, 3> rhs) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    if (m[piv][col] == 0.0) throw DegenerateInputError("singular 3x3 system");
    std::swap(m[piv], m[col]);
    std::swap(rhs[piv], rhs[col]);
    for (int r = col + 1; r < 3; ++r) {
      const double f = m[r][col] / m[col][col];
      for (int k = col; k < 3; ++k) m[r][k] -= f * m[col][k];
      rhs[r] -= f * rhs[col];
    }
  }
  std::array<double, 3> x{};
  for (int r = 2; r >= 0; --r) {
    double v = rhs[r];
    for (int k = r + 1; k < 3; ++k) v -= m[r][k] * x[k];
    x[r] = v / m[r][r];
  }
  return x;
}

ResidueEstimate residue_estimate(const QuadraticRing& ring, const Cone& cone, std::uint64_t B,
                                 const ExecOptions& opts) {
  cone.validate();
  cone.check_ring(ring);
  if (B < 10'000) throw DomainError("residue estimation needs B >= 10^4");
  if (B > (std::uint64_t{1} << 40)) throw RangeError("residue truncation bound above 2^40");

  constexpr std::size_t J = ResidueEstimate::kEpsilons.size();
  const std::int64_t d = ring.d();
  const long double s_lo = cone.slope_lo(ring);
  const long double s_hi = cone.slope_hi(ring);
  const long double denom = ring.imaginary() ? 1.0L : 1.0L - static_cast<long double>(d) * s_hi * s_hi;
  const auto x_max = static_cast<std::int64_t>(std::sqrt(static_cast<long double>(B) / denom)) + 1;

  // integer e strictly inside the cone for each first coordinate c
  std::vector<std::int64_t> e_lo(x_max + 1), e_hi(x_max + 1);
  for (std::int64_t c = 1; c <= x_max; ++c) {
    std::int64_t lo = static_cast<std::int64_t>(std::floor(s_lo * c)) - 1;
    while (slope_side(c, lo, s_lo) <= 0) ++lo;
    std::int64_t hi = static_cast<std::int64_t>(std::ceil(s_hi * c)) + 1;
    while (slope_side(c, hi, s_hi) >= 0) --hi;
    e_lo[c] = std::max<std::int64_t>(lo, 1);
    e_hi[c] = hi;
  }

  // prefix[j][offset[x] + (y - e_lo[x]) + 1] = sum over y' < y+1 of the weights
  std::vector<std::size_t> offset(x_max + 2, 0);
  for (std::int64_t x = 1; x <= x_max; ++x)
    offset[x + 1] = offset[x] + static_cast<std::size_t>(std::max<std::int64_t>(e_hi[x] - e_lo[x] + 1, 0) + 1);
  std::array<std::vector<long double>, J> prefix;
  std::array<long double, J> S1{};
  for (std::size_t j = 0; j < J; ++j) prefix[j].assign(offset[x_max + 1], 0.0L);
  for (std::int64_t x = 1; x <= x_max; ++x) {
    std::array<long double, J> run{};
    for (std::int64_t y = e_lo[x]; y <= e_hi[x]; ++y) {
      const i128 n = ring.norm(x, y);
      const std::size_t at = offset[x] + static_cast<std::size_t>(y - e_lo[x]) + 1;
      for (std::size_t j = 0; j < J; ++j) {
        if (n >= 1 && n <= static_cast<i128>(B)) {
          const long double w = std::pow(static_cast<long double>(n), -1.0L - ResidueEstimate::kEpsilons[j]);
          run[j] += w;
          S1[j] += w;
        }
        prefix[j][at] = run[j];
      }
    }
  }

  auto row_sum = [&](std::size_t j, std::int64_t x, std::int64_t y0, std::int64_t y1) -> long double {
    y0 = std::max(y0, e_lo[x]);
    y1 = std::min(y1, e_hi[x]);
    if (y0 > y1) return 0.0L;
    const auto& P = prefix[j];
    return P[offset[x] + static_cast<std::size_t>(y1 - e_lo[x]) + 1] - P[offset[x] + static_cast<std::size_t>(y0 - e_lo[x])];
  };

  auto qreal = [d](long double x, long double y) { return x * x - static_cast<long double>(d) * y * y; };
  const std::size_t nshards = static_cast<std::size_t>(std::min<std::int64_t>(256, x_max));
  std::vector<std::array<long double, J>> parts(nshards);
  std::mutex progress_mutex;
  parallel_for_index(nshards, opts.workers, [&](std::size_t i) {
    const std::int64_t lo = 1 + x_max * static_cast<std::int64_t>(i) / static_cast<std::int64_t>(nshards);
    const std::int64_t hi = 1 + x_max * static_cast<std::int64_t>(i + 1) / static_cast<std::int64_t>(nshards);
    std::array<long double, J> acc{};
    std::uint64_t points = 0;
    for (std::int64_t a = lo; a < hi; ++a) {
      for (std::int64_t b = e_lo[a]; b <= e_hi[a]; ++b) {
        const i128 n1 = ring.norm(a, b);
        if (n1 < 1 || n1 > static_cast<i128>(B)) continue;
        std::array<long double, J> inner{};
        for (std::int64_t c = 1; a + c <= x_max; ++c) {
          const std::int64_t x = a + c;
          const long double lo_edge = qreal(x, b + s_lo * c);
          const long double hi_edge = qreal(x, b + s_hi * c);
          if (std::min(lo_edge, hi_edge) > static_cast<long double>(B)) break;
          if (e_lo[c] > e_hi[c]) continue;
          for (std::size_t j = 0; j < J; ++j) inner[j] += row_sum(j, x, b + e_lo[c], b + e_hi[c]);
          ++points;
        }
        for (std::size_t j = 0; j < J; ++j)
          acc[j] += std::pow(static_cast<long double>(n1), -1.0L - ResidueEstimate::kEpsilons[j]) * inner[j];
      }
    }
    std::lock_guard lock(progress_mutex);
    parts[i] = acc;
    if (opts.on_progress) opts.on_progress(ProgressEvent{i, points});
  });
  std::array<long double, J> S2{};
  for (const auto& p : parts)
    for (std::size_t j = 0; j < J; ++j) S2[j] += p[j];

  ResidueEstimate out;
  if (S1[0] == 0.0L) return out;
  std::array<std::array<double, 3>, 3> m1{}, m2{};
  for (std::size_t j = 0; j < J; ++j) {
    const double eps = ResidueEstimate::kEpsilons[j];
    const double g = (1.0 - std::pow(static_cast<double>(B), -eps)) / eps;
    out.single_sum[j] = static_cast<double>(S1[j]);
    out.double_sum[j] = static_cast<double>(S2[j]);
    out.single_raw[j] = out.single_sum[j] / g;
    out.double_raw[j] = 2.0 * out.double_sum[j] / (g * g);
    m1[j] = {g, 1.0, eps};
    m2[j] = {0.5 * g * g, g, 1.0};
  }
  out.single = solve3(m1, out.single_sum)[0];
  out.dbl = solve3(m2, out.double_sum)[0];

  auto monotone = [](const std::array<double, 3>& v) {
    return (v[0] <= v[1] && v[1] <= v[2]) || (v[0] >= v[1] && v[1] >= v[2]);
  };
  auto far = [](double fit, double last) { return std::fabs(fit - last) > 0.25 * std::fabs(last); };
  std::string why;
  if (!monotone(out.single_raw)) why += "single-sum sequence is not monotone in eps; ";
  if (!monotone(out.double_raw)) why += "double-sum sequence is not monotone in eps; ";
  if (far(out.single, out.single_raw[2])) why += "single fit moves the smallest-eps value by more than 25%; ";
  if (far(out.dbl, out.double_raw[2])) why += "double fit moves the smallest-eps value by more than 25%; ";
  const double ratio = out.identity_ratio();
  if (!std::isfinite(ratio) || ratio <= 0.0) why += "identity ratio is not positive; ";
  if (!why.empty()) {
    out.unstable = true;
    out.warning = why.substr(0, why.size() - 2);
  }
  return out;
}

}  // namespace normprimes
