#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "normprimes/polyform.hpp"
#include "normprimes/primality.hpp"
#include "normprimes/quadrature.hpp"

namespace normprimes {

inline constexpr std::uint64_t kMaxNormBound = std::uint64_t{1} << 62;

/// Half-open slope window [t_lo, t_hi) for t = b/a.
struct SlopeWindow {
  double t_lo = 0.0;
  double t_hi = 0.0;
  void validate() const;
};

/// Open angular sector. A point (a, b) with a, b >= 1 lies inside iff
/// alpha_lo < angle < alpha_hi, where angle is atan(b sqrt|d| / a) for the
/// circular kind and atanh(b sqrt d / a) for the hyperbolic kind.
struct Cone {
  KernelKind kind = KernelKind::circular;
  double alpha_lo = 0.0;
  double alpha_hi = 0.0;

  void validate() const;
  /// Checks that the kind matches the sign of d (circular iff d < 0).
  void check_ring(const QuadraticRing& ring) const;
  /// Bounds on b/a equivalent to the angular bounds for this ring.
  long double slope_lo(const QuadraticRing& ring) const;
  long double slope_hi(const QuadraticRing& ring) const;
  bool contains(const QuadraticRing& ring, std::int64_t a, std::int64_t b) const;

  static Cone sector(const QuadraticRing& ring, double alpha_lo, double alpha_hi);
};

/// Sign of b - t*a, with points within 1e-14 relative of the line
/// reported as 0 (on the boundary).
int slope_side(std::int64_t a, std::int64_t b, long double t) noexcept;

/// Calls fn(i) for i in [0, n) on `workers` threads (0 = hardware
/// concurrency). The first exception stops the pool and is rethrown.
void parallel_for_index(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn);

enum class PairBoundMode {
  norm,        // N(gamma1) < M and N(gamma1 + gamma2) < M
  coordinate,  // coordinates of gamma1 and gamma1 + gamma2 all <= M
};

struct PairCount {
  QuadraticRing ring;
  Cone cone;
  std::uint64_t norm_bound = 0;
  std::uint64_t count = 0;
};

struct ProgressEvent {
  std::size_t shard = 0;
  std::uint64_t points = 0;
};

struct ExecOptions {
  unsigned workers = 1;  // 0 picks the hardware concurrency
  std::function<void(const ProgressEvent&)> on_progress;
};

/// A count split into independent slices over the first coordinate a of
/// the enumerated point (gamma1 for pair counts). Each slice yields one
/// tally per slot; totals are slot-wise sums, so the result is independent
/// of how slices are scheduled.
class ShardedCount {
 public:
  virtual ~ShardedCount() = default;
  /// Enumeration runs over a in [1, a_end()).
  virtual std::int64_t a_end() const = 0;
  virtual std::size_t slots() const = 0;
  virtual std::vector<std::uint64_t> count_range(std::int64_t a_lo, std::int64_t a_hi,
                                                 std::uint64_t& points) const = 0;
};

struct ShardRange {
  std::int64_t a_lo = 0;
  std::int64_t a_hi = 0;
};

/// Splits [1, a_end) into at most max_shards contiguous ranges. The plan
/// depends only on the count, never on the worker count.
std::vector<ShardRange> plan_shards(const ShardedCount& task, std::size_t max_shards = 256);

using ShardTally = std::vector<std::uint64_t>;

/// Runs the given shards on opts.workers threads. Shards for which
/// `skip(i)` returns true are left empty. `on_complete` is called once per
/// finished shard, serialized. The first exception thrown anywhere stops
/// the run and is rethrown.
std::vector<ShardTally> run_shards(const ShardedCount& task, std::span<const ShardRange> shards,
                                   const ExecOptions& opts,
                                   const std::function<bool(std::size_t)>& skip = {},
                                   const std::function<void(std::size_t, const ShardTally&)>& on_complete = {});

ShardTally sum_tallies(std::span<const ShardTally> tallies, std::size_t slots);

/// Convenience: plan, run and sum.
ShardTally run_count(const ShardedCount& task, const ExecOptions& opts);

// Prime predicate backed by a bitmap for moderate ranges and by the
// deterministic Miller-Rabin test above that.
class PrimeOracle {
 public:
  explicit PrimeOracle(std::uint64_t max_value);
  bool operator()(std::uint64_t n) const noexcept { return bitmap_ ? bitmap_->contains(n) : is_prime(n); }
  bool uses_bitmap() const noexcept { return bitmap_ != nullptr; }

 private:
  std::shared_ptr<const PrimeBitmap> bitmap_;
};

// Single primes f(a, b) < M per slope window; windows [cuts[j], cuts[j+1]).
class WindowCounter final : public ShardedCount {
 public:
  WindowCounter(NormForm f, std::uint64_t M, std::vector<double> cuts);
  std::int64_t a_end() const override { return a_end_; }
  std::size_t slots() const override { return cuts_.size() - 1; }
  std::vector<std::uint64_t> count_range(std::int64_t a_lo, std::int64_t a_hi, std::uint64_t& points) const override;

 private:
  NormForm f_;
  std::uint64_t M_;
  std::vector<double> cuts_;
  std::int64_t a_end_ = 1;
  PrimeOracle prime_;
};

// Points of Z[sqrt d] with prime norm < M, one slot per cone.
class SplitPrimeCounter final : public ShardedCount {
 public:
  SplitPrimeCounter(QuadraticRing ring, std::uint64_t M, std::vector<Cone> cones, bool exclude_ramified = true);
  std::int64_t a_end() const override { return a_end_; }
  std::size_t slots() const override { return cones_.size(); }
  std::vector<std::uint64_t> count_range(std::int64_t a_lo, std::int64_t a_hi, std::uint64_t& points) const override;

 private:
  QuadraticRing ring_;
  std::uint64_t M_;
  std::vector<Cone> cones_;
  bool exclude_ramified_;
  std::int64_t a_end_ = 1;
  PrimeOracle prime_;
};

// Ordered pairs (gamma1, gamma2) in nested cones (lower edge alpha_lo,
// upper edges ascending) with N(gamma1) and N(gamma1 + gamma2) prime.
// Slot k counts pairs whose smallest containing cone is k; prefix sums give
// the nested counts.
class PairCounter final : public ShardedCount {
 public:
  PairCounter(QuadraticRing ring, std::uint64_t bound, KernelKind kind, double alpha_lo,
              std::vector<double> upper_edges, PairBoundMode mode = PairBoundMode::norm);
  std::int64_t a_end() const override { return a_end_; }
  std::size_t slots() const override { return slope_hi_.size(); }
  std::vector<std::uint64_t> count_range(std::int64_t a_lo, std::int64_t a_hi, std::uint64_t& points) const override;

  /// Nested counts from slot tallies.
  static std::vector<std::uint64_t> nested(std::span<const std::uint64_t> slot_tally);

 private:
  QuadraticRing ring_;
  std::uint64_t bound_;
  PairBoundMode mode_;
  long double slope_lo_;
  std::vector<long double> slope_hi_;
  std::int64_t a_end_ = 1;
  PrimeOracle prime_;
};

std::uint64_t count_primes_in_window(const NormForm& f, std::uint64_t M, const SlopeWindow& w,
                                     const ExecOptions& opts = {});

std::vector<std::uint64_t> decile_counts(const NormForm& f, std::uint64_t M, std::span<const double> cuts,
                                         const ExecOptions& opts = {});

std::uint64_t count_split_primes_in_cone(const QuadraticRing& ring, std::uint64_t M, const Cone& cone,
                                         const ExecOptions& opts = {}, bool exclude_ramified = true);

PairCount count_pairs_in_cone(const QuadraticRing& ring, std::uint64_t M, const Cone& cone,
                              const ExecOptions& opts = {}, PairBoundMode mode = PairBoundMode::norm);

/// Element k-1 counts pairs in the cone (pi/36, (k+1) pi/36), k = 1..k_max.
std::vector<std::uint64_t> pair_counts_nested(const QuadraticRing& ring, std::uint64_t M, int k_max,
                                              const ExecOptions& opts = {},
                                              PairBoundMode mode = PairBoundMode::norm);

/// Truncated discrete double zeta over the slope cone 0 < b/a < T (T may be
/// +infinity for imaginary rings): sum of N(g1)^-s1 N(g1+g2)^-s2 over
/// N(g1) <= B and N(g1+g2) <= B, with compensated summation.
double zeta_discrete(const QuadraticRing& ring, double cone_T, double s1, double s2, std::uint64_t B,
                     const ExecOptions& opts = {});

}  // namespace normprimes
