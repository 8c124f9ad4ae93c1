#include "normprimes/lattice.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "normprimes/errors.hpp"

namespace normprimes {

namespace {

constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max() / 4;
constexpr std::uint64_t kBitmapLimit = std::uint64_t{1} << 30;

std::uint64_t isqrt_u128(u128 n) {
  if (n == 0) return 0;
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(n)));
  while (static_cast<u128>(r) * r > n) --r;
  while (static_cast<u128>(r + 1) * (r + 1) <= n) ++r;
  return r;
}

// Smallest b with b - t a > 0 (strictly off the boundary).
std::int64_t first_above(std::int64_t a, long double t) {
  auto b = static_cast<std::int64_t>(std::floor(t * a)) - 1;
  while (slope_side(a, b, t) <= 0) ++b;
  return b;
}

// Smallest b with b - t a >= 0 (boundary included).
std::int64_t first_at_or_above(std::int64_t a, long double t) {
  auto b = static_cast<std::int64_t>(std::floor(t * a)) - 1;
  while (slope_side(a, b, t) < 0) ++b;
  return b;
}

// Largest b with b - t a < 0.
std::int64_t last_below(std::int64_t a, long double t) {
  if (std::isinf(t)) return kUnbounded;
  auto b = static_cast<std::int64_t>(std::ceil(t * a)) + 1;
  while (slope_side(a, b, t) >= 0) --b;
  return b;
}

unsigned resolve_workers(unsigned w) {
  if (w != 0) return w;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

void check_bound(std::uint64_t M, std::uint64_t min_value) {
  if (M < min_value) throw DomainError("norm bound " + std::to_string(M) + " is below " + std::to_string(min_value));
  if (M > kMaxNormBound) throw RangeError("norm bound " + std::to_string(M) + " exceeds 2^62");
}

bool ramified(std::uint64_t p, std::int64_t d) {
  return p == 2 || (d % static_cast<std::int64_t>(p)) == 0;
}

// Integer y-range [lo, hi] in which x^2 - d y^2 < bound (y >= 0).
std::pair<std::int64_t, std::int64_t> norm_rows(std::int64_t d, std::int64_t x, std::uint64_t bound) {
  const i128 x2 = static_cast<i128>(x) * x;
  const i128 room = static_cast<i128>(bound) - 1 - x2;
  if (d < 0) {
    if (room < 0) return {1, 0};
    return {0, static_cast<std::int64_t>(isqrt_u128(static_cast<u128>(room / (-d))))};
  }
  if (room >= 0) return {0, kUnbounded};
  // need d y^2 > x^2 - bound, i.e. d y^2 >= -room
  const u128 need = static_cast<u128>(-room);
  auto y = static_cast<std::int64_t>(isqrt_u128(need / static_cast<u128>(d)));
  while (static_cast<u128>(d) * static_cast<u128>(y) * static_cast<u128>(y) < need) ++y;
  return {y, kUnbounded};
}

}  // namespace

void SlopeWindow::validate() const {
  if (!(t_lo >= 0.0) || !(t_hi > t_lo) || !std::isfinite(t_hi))
    throw DomainError("slope window requires 0 <= t_lo < t_hi < inf");
}

void Cone::validate() const {
  if (!(alpha_lo >= 0.0) || !(alpha_hi > alpha_lo) || !std::isfinite(alpha_hi))
    throw DomainError("cone requires 0 <= alpha_lo < alpha_hi < inf");
  if (kind == KernelKind::circular && !(alpha_hi < std::numbers::pi / 2))
    throw DomainError("circular cone must stay below pi/2");
  if (kind == KernelKind::hyperbolic && alpha_hi > 20.0) throw DomainError("hyperbolic cone angle above 20");
}

void Cone::check_ring(const QuadraticRing& ring) const {
  const bool circ = kind == KernelKind::circular;
  if (circ != ring.imaginary())
    throw ConfigError(std::string(to_string(kind)) + " cone does not match d=" + std::to_string(ring.d()));
}

long double Cone::slope_lo(const QuadraticRing& ring) const {
  const long double r = std::sqrt(static_cast<long double>(std::llabs(ring.d())));
  return (kind == KernelKind::circular ? std::tan(static_cast<long double>(alpha_lo))
                                       : std::tanh(static_cast<long double>(alpha_lo))) / r;
}

long double Cone::slope_hi(const QuadraticRing& ring) const {
  const long double r = std::sqrt(static_cast<long double>(std::llabs(ring.d())));
  return (kind == KernelKind::circular ? std::tan(static_cast<long double>(alpha_hi))
                                       : std::tanh(static_cast<long double>(alpha_hi))) / r;
}

bool Cone::contains(const QuadraticRing& ring, std::int64_t a, std::int64_t b) const {
  if (a < 1 || b < 1) return false;
  return slope_side(a, b, slope_lo(ring)) > 0 && slope_side(a, b, slope_hi(ring)) < 0;
}

Cone Cone::sector(const QuadraticRing& ring, double alpha_lo, double alpha_hi) {
  Cone c{ring.imaginary() ? KernelKind::circular : KernelKind::hyperbolic, alpha_lo, alpha_hi};
  c.validate();
  return c;
}

void parallel_for_index(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  workers = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        stop.store(true);
        return;
      }
    }
  };
  if (workers <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

int slope_side(std::int64_t a, std::int64_t b, long double t) noexcept {
  const long double diff = static_cast<long double>(b) - t * static_cast<long double>(a);
  const long double tol = 1e-14L * (std::fabs(static_cast<long double>(b)) + 1.0L);
  if (diff > tol) return 1;
  if (diff < -tol) return -1;
  return 0;
}

std::vector<ShardRange> plan_shards(const ShardedCount& task, std::size_t max_shards) {
  const std::int64_t end = task.a_end();
  std::vector<ShardRange> out;
  if (end <= 1) return out;
  const auto span = static_cast<std::uint64_t>(end - 1);
  const std::uint64_t n = std::min<std::uint64_t>(std::max<std::size_t>(max_shards, 1), span);
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto lo = static_cast<std::int64_t>(1 + span * i / n);
    const auto hi = static_cast<std::int64_t>(1 + span * (i + 1) / n);
    out.push_back({lo, hi});
  }
  return out;
}

std::vector<ShardTally> run_shards(const ShardedCount& task, std::span<const ShardRange> shards,
                                   const ExecOptions& opts, const std::function<bool(std::size_t)>& skip,
                                   const std::function<void(std::size_t, const ShardTally&)>& on_complete) {
  std::vector<ShardTally> out(shards.size());
  std::mutex done_mutex;
  parallel_for_index(shards.size(), opts.workers, [&](std::size_t i) {
    if (skip && skip(i)) return;
    std::uint64_t points = 0;
    ShardTally tally = task.count_range(shards[i].a_lo, shards[i].a_hi, points);
    std::lock_guard lock(done_mutex);
    out[i] = tally;
    if (opts.on_progress) opts.on_progress(ProgressEvent{i, points});
    if (on_complete) on_complete(i, out[i]);
  });
  return out;
}

ShardTally sum_tallies(std::span<const ShardTally> tallies, std::size_t slots) {
  ShardTally total(slots, 0);
  for (const auto& t : tallies) {
    if (t.empty()) continue;
    if (t.size() != slots) throw ConsistencyError("shard tally has the wrong number of slots");
    for (std::size_t k = 0; k < slots; ++k) total[k] += t[k];
  }
  return total;
}

ShardTally run_count(const ShardedCount& task, const ExecOptions& opts) {
  const auto shards = plan_shards(task);
  const auto tallies = run_shards(task, shards, opts);
  return sum_tallies(tallies, task.slots());
}

PrimeOracle::PrimeOracle(std::uint64_t max_value) {
  if (max_value <= kBitmapLimit) bitmap_ = std::make_shared<const PrimeBitmap>(sieve_upto(std::max<std::uint64_t>(max_value, 2)));
}

// ---------------------------------------------------------------- windows

WindowCounter::WindowCounter(NormForm f, std::uint64_t M, std::vector<double> cuts)
    : f_(std::move(f)), M_(M), cuts_(std::move(cuts)), prime_(0) {
  check_bound(M_, 2);
  if (cuts_.size() < 2) throw DomainError("at least one slope window is required");
  for (std::size_t j = 0; j + 1 < cuts_.size(); ++j) SlopeWindow{cuts_[j], cuts_[j + 1]}.validate();

  const double lo = cuts_.front();
  const double hi = cuts_.back();
  if (!(hi < singularity_bound(f_))) throw DomainError("slope windows reach a real root of f(1,t)");
  std::vector<double> deriv;
  for (int i = 1; i <= f_.degree(); ++i) deriv.push_back(static_cast<double>(i) * static_cast<double>(f_.coefficient(i)));
  double m = std::min(dehomogenize(f_, lo), dehomogenize(f_, hi));
  for (double r : real_roots(deriv, lo, hi)) m = std::min(m, dehomogenize(f_, r));
  if (!(m > 0.0)) throw DomainError("f(1,t) is not positive on the slope windows");

  const int n = f_.degree();
  const double amax = std::pow(static_cast<double>(M_) / (0.99 * m), 1.0 / n);
  a_end_ = static_cast<std::int64_t>(std::floor(amax)) + 2;
  if (a_end_ > kMaxEvalCoordinate || hi * static_cast<double>(a_end_) > static_cast<double>(kMaxEvalCoordinate))
    throw RangeError("enumeration box exceeds the 2^20 coordinate limit");
  // values of f below M only; the bitmap is worthwhile in the sieve range
  prime_ = PrimeOracle(M_ <= kBitmapLimit ? M_ : kBitmapLimit + 1);
}

std::vector<std::uint64_t> WindowCounter::count_range(std::int64_t a_lo, std::int64_t a_hi,
                                                      std::uint64_t& points) const {
  const std::size_t K = cuts_.size() - 1;
  std::vector<long double> t(cuts_.begin(), cuts_.end());
  std::vector<std::uint64_t> tally(K, 0);
  for (std::int64_t a = a_lo; a < a_hi; ++a) {
    std::int64_t b = std::max<std::int64_t>(first_at_or_above(a, t[0]), 1);
    for (std::size_t j = 0; j < K; ++j) {
      const std::int64_t b_end = last_below(a, t[j + 1]);
      for (; b <= b_end; ++b) {
        ++points;
        const i128 v = eval_form(f_, a, b);
        if (v < 2 || v >= static_cast<i128>(M_)) continue;
        if (prime_(static_cast<std::uint64_t>(v))) ++tally[j];
      }
    }
  }
  return tally;
}

// ---------------------------------------------------------- split primes

SplitPrimeCounter::SplitPrimeCounter(QuadraticRing ring, std::uint64_t M, std::vector<Cone> cones,
                                     bool exclude_ramified)
    : ring_(ring), M_(M), cones_(std::move(cones)), exclude_ramified_(exclude_ramified), prime_(0) {
  check_bound(M_, 2);
  if (cones_.empty()) throw DomainError("at least one cone is required");
  long double s_max = 0;
  for (const auto& c : cones_) {
    c.validate();
    c.check_ring(ring_);
    s_max = std::max(s_max, c.slope_hi(ring_));
  }
  long double denom = 1.0L;
  if (!ring_.imaginary()) denom = 1.0L - static_cast<long double>(ring_.d()) * s_max * s_max;
  a_end_ = static_cast<std::int64_t>(std::sqrt(static_cast<long double>(M_) / denom)) + 2;
  prime_ = PrimeOracle(M_);
}

std::vector<std::uint64_t> SplitPrimeCounter::count_range(std::int64_t a_lo, std::int64_t a_hi,
                                                          std::uint64_t& points) const {
  std::vector<std::uint64_t> tally(cones_.size(), 0);
  const std::int64_t d = ring_.d();
  for (std::size_t k = 0; k < cones_.size(); ++k) {
    const long double lo = cones_[k].slope_lo(ring_);
    const long double hi = cones_[k].slope_hi(ring_);
    for (std::int64_t a = a_lo; a < a_hi; ++a) {
      auto [n_lo, n_hi] = norm_rows(d, a, M_);
      const std::int64_t b0 = std::max({first_above(a, lo), std::int64_t{1}, n_lo});
      const std::int64_t b1 = std::min(last_below(a, hi), n_hi);
      for (std::int64_t b = b0; b <= b1; ++b) {
        ++points;
        const i128 v = ring_.norm(a, b);
        if (v < 2) continue;
        const auto p = static_cast<std::uint64_t>(v);
        if (!prime_(p)) continue;
        if (exclude_ramified_ && ramified(p, d)) continue;
        ++tally[k];
      }
    }
  }
  return tally;
}

// ----------------------------------------------------------------- pairs

PairCounter::PairCounter(QuadraticRing ring, std::uint64_t bound, KernelKind kind, double alpha_lo,
                         std::vector<double> upper_edges, PairBoundMode mode)
    : ring_(ring), bound_(bound), mode_(mode), prime_(0) {
  if (upper_edges.empty()) throw DomainError("at least one cone is required");
  if (!std::is_sorted(upper_edges.begin(), upper_edges.end()) ||
      std::adjacent_find(upper_edges.begin(), upper_edges.end()) != upper_edges.end())
    throw DomainError("nested cone edges must be strictly increasing");
  for (double hi : upper_edges) {
    Cone c{kind, alpha_lo, hi};
    c.validate();
    c.check_ring(ring_);
    slope_hi_.push_back(c.slope_hi(ring_));
  }
  slope_lo_ = Cone{kind, alpha_lo, upper_edges.back()}.slope_lo(ring_);
  const long double s_max = slope_hi_.back();
  const auto absd = static_cast<long double>(std::llabs(ring_.d()));

  std::uint64_t max_norm = 0;
  if (mode_ == PairBoundMode::norm) {
    check_bound(bound_, 2);
    long double denom = ring_.imaginary() ? 1.0L : 1.0L - absd * s_max * s_max;
    a_end_ = static_cast<std::int64_t>(std::sqrt(static_cast<long double>(bound_) / denom)) + 2;
    max_norm = bound_;
  } else {
    if (bound_ < 1 || bound_ > (std::uint64_t{1} << 24)) throw DomainError("coordinate bound must lie in [1, 2^24]");
    a_end_ = static_cast<std::int64_t>(bound_) + 1;
    const long double B = static_cast<long double>(bound_);
    const long double y = std::min(B, s_max * B);
    max_norm = static_cast<std::uint64_t>(ring_.imaginary() ? B * B + absd * y * y : B * B) + 1;
  }
  prime_ = PrimeOracle(max_norm);
}

std::vector<std::uint64_t> PairCounter::count_range(std::int64_t a_lo, std::int64_t a_hi,
                                                    std::uint64_t& points) const {
  const std::size_t K = slope_hi_.size();
  const std::int64_t d = ring_.d();
  const bool by_norm = mode_ == PairBoundMode::norm;
  const auto B = static_cast<std::int64_t>(bound_);
  const long double s_top = slope_hi_.back();
  std::vector<std::uint64_t> tally(K, 0);
  std::vector<std::int64_t> seg_end(K);

  auto qreal = [d](long double x, long double y) { return x * x - static_cast<long double>(d) * y * y; };

  for (std::int64_t a = a_lo; a < a_hi; ++a) {
    std::int64_t b_lo = std::max(first_above(a, slope_lo_), std::int64_t{1});
    std::int64_t b_hi = last_below(a, s_top);
    if (by_norm) {
      auto [n_lo, n_hi] = norm_rows(d, a, bound_);
      b_lo = std::max(b_lo, n_lo);
      b_hi = std::min(b_hi, n_hi);
    } else {
      b_hi = std::min(b_hi, B);
    }
    for (std::int64_t b = b_lo; b <= b_hi; ++b) {
      const i128 n1 = ring_.norm(a, b);
      if (n1 < 2 || !prime_(static_cast<std::uint64_t>(n1))) continue;
      std::size_t k1 = 0;
      while (slope_side(a, b, slope_hi_[k1]) >= 0) ++k1;

      for (std::int64_t c = 1;; ++c) {
        const std::int64_t x = a + c;
        if (by_norm) {
          const long double lo_edge = qreal(x, b + slope_lo_ * c);
          const long double hi_edge = qreal(x, b + s_top * c);
          if (std::min(lo_edge, hi_edge) >= static_cast<long double>(bound_)) break;
        } else if (x > B) {
          break;
        }
        std::int64_t e_lo = std::max(first_above(c, slope_lo_), std::int64_t{1});
        std::int64_t e_hi = last_below(c, s_top);
        if (by_norm) {
          auto [y_lo, y_hi] = norm_rows(d, x, bound_);
          e_lo = std::max(e_lo, y_lo - b);
          if (y_hi != kUnbounded) e_hi = std::min(e_hi, y_hi - b);
        } else {
          e_hi = std::min(e_hi, B - b);
        }
        if (e_lo > e_hi) continue;
        for (std::size_t k = 0; k < K; ++k) seg_end[k] = std::min(last_below(c, slope_hi_[k]), e_hi);

        std::int64_t y = b + e_lo;
        auto n = static_cast<std::int64_t>(ring_.norm(x, y));
        std::int64_t e = e_lo;
        for (std::size_t k = 0; k < K && e <= e_hi; ++k) {
          std::uint64_t hits = 0;
          for (; e <= seg_end[k]; ++e) {
            if (n >= 2 && prime_(static_cast<std::uint64_t>(n))) ++hits;
            n -= d * (2 * y + 1);
            ++y;
          }
          tally[std::max(k, k1)] += hits;
        }
        points += static_cast<std::uint64_t>(e_hi - e_lo + 1);
      }
    }
  }
  return tally;
}

std::vector<std::uint64_t> PairCounter::nested(std::span<const std::uint64_t> slot_tally) {
  std::vector<std::uint64_t> out(slot_tally.size());
  std::uint64_t run = 0;
  for (std::size_t k = 0; k < slot_tally.size(); ++k) out[k] = run += slot_tally[k];
  return out;
}

// ------------------------------------------------------------ operations

std::uint64_t count_primes_in_window(const NormForm& f, std::uint64_t M, const SlopeWindow& w,
                                     const ExecOptions& opts) {
  w.validate();
  WindowCounter task(f, M, {w.t_lo, w.t_hi});
  return run_count(task, opts)[0];
}

std::vector<std::uint64_t> decile_counts(const NormForm& f, std::uint64_t M, std::span<const double> cuts,
                                         const ExecOptions& opts) {
  WindowCounter task(f, M, std::vector<double>(cuts.begin(), cuts.end()));
  return run_count(task, opts);
}

std::uint64_t count_split_primes_in_cone(const QuadraticRing& ring, std::uint64_t M, const Cone& cone,
                                         const ExecOptions& opts, bool exclude_ramified) {
  SplitPrimeCounter task(ring, M, {cone}, exclude_ramified);
  return run_count(task, opts)[0];
}

PairCount count_pairs_in_cone(const QuadraticRing& ring, std::uint64_t M, const Cone& cone,
                              const ExecOptions& opts, PairBoundMode mode) {
  PairCounter task(ring, M, cone.kind, cone.alpha_lo, {cone.alpha_hi}, mode);
  return PairCount{ring, cone, M, run_count(task, opts)[0]};
}

std::vector<std::uint64_t> pair_counts_nested(const QuadraticRing& ring, std::uint64_t M, int k_max,
                                              const ExecOptions& opts, PairBoundMode mode) {
  if (k_max < 1) throw DomainError("k_max must be at least 1");
  const double step = std::numbers::pi / 36;
  std::vector<double> edges;
  for (int k = 1; k <= k_max; ++k) edges.push_back((k + 1) * step);
  const KernelKind kind = ring.imaginary() ? KernelKind::circular : KernelKind::hyperbolic;
  PairCounter task(ring, M, kind, step, edges, mode);
  return PairCounter::nested(run_count(task, opts));
}

double zeta_discrete(const QuadraticRing& ring, double cone_T, double s1, double s2, std::uint64_t B,
                     const ExecOptions& opts) {
  if (!(s1 + s2 > 2.0) || !(s2 > 1.0)) throw DivergenceError("discrete double zeta needs s2 > 1 and s1 + s2 > 2");
  if (B < 2) throw DomainError("truncation bound must be at least 2");
  check_bound(B, 2);
  if (!(cone_T > 0.0)) throw DomainError("cone slope bound must be positive");
  const long double T = cone_T;
  if (!ring.imaginary() && !(T * std::sqrt(static_cast<long double>(ring.d())) < 1.0L))
    throw DomainError("real cone requires T sqrt(d) < 1");
  const std::int64_t d = ring.d();
  const std::uint64_t bound = B + 1;  // norms <= B
  long double denom = ring.imaginary() ? 1.0L : 1.0L - static_cast<long double>(d) * T * T;
  const auto a_end = static_cast<std::int64_t>(std::sqrt(static_cast<long double>(bound) / denom)) + 2;

  const std::int64_t span = a_end - 1;
  const std::size_t nshards = static_cast<std::size_t>(std::min<std::int64_t>(256, span));
  struct Acc {
    double sum = 0, comp = 0;
    void add(double v) {
      const double t = sum + v;
      comp += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
      sum = t;
    }
    double value() const { return sum + comp; }
  };
  std::vector<Acc> parts(nshards);
  auto qreal = [d](long double x, long double y) { return x * x - static_cast<long double>(d) * y * y; };
  std::mutex progress_mutex;

  parallel_for_index(nshards, opts.workers, [&](std::size_t i) {
    const auto lo = static_cast<std::int64_t>(1 + span * static_cast<std::int64_t>(i) / static_cast<std::int64_t>(nshards));
    const auto hi = static_cast<std::int64_t>(1 + span * static_cast<std::int64_t>(i + 1) / static_cast<std::int64_t>(nshards));
    Acc acc;
    std::uint64_t points = 0;
    for (std::int64_t a = lo; a < hi; ++a) {
      auto [n_lo, n_hi] = norm_rows(d, a, bound);
      const std::int64_t b0 = std::max<std::int64_t>(1, n_lo);
      const std::int64_t b1 = std::min(last_below(a, T), n_hi);
      for (std::int64_t b = b0; b <= b1; ++b) {
        const double w1 = std::pow(static_cast<double>(ring.norm(a, b)), -s1);
        Acc inner;
        for (std::int64_t c = 1;; ++c) {
          const std::int64_t x = a + c;
          const long double lo_edge = qreal(x, b);
          const long double hi_edge = std::isinf(T) ? std::numeric_limits<long double>::infinity() : qreal(x, b + T * c);
          if (std::min(lo_edge, hi_edge) >= static_cast<long double>(bound)) break;
          auto [y_lo, y_hi] = norm_rows(d, x, bound);
          const std::int64_t e_lo = std::max<std::int64_t>(1, y_lo - b);
          std::int64_t e_hi = last_below(c, T);
          if (y_hi != kUnbounded) e_hi = std::min(e_hi, y_hi - b);
          for (std::int64_t e = e_lo; e <= e_hi; ++e) {
            inner.add(std::pow(static_cast<double>(ring.norm(x, b + e)), -s2));
            ++points;
          }
        }
        acc.add(w1 * inner.value());
      }
    }
    std::lock_guard lock(progress_mutex);
    parts[i] = acc;
    if (opts.on_progress) opts.on_progress(ProgressEvent{i, points});
  });
  Acc total;
  for (const auto& p : parts) total.add(p.value());
  return total.value();
}

}  // namespace normprimes
