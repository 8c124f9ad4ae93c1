#include <doctest.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "normprimes/errors.hpp"
#include "normprimes/lattice.hpp"
#include "oracles.hpp"

using namespace normprimes;

namespace {

constexpr double kStep = std::numbers::pi / 36;

double brute_zeta(std::int64_t d, double T, double s1, double s2, std::uint64_t B) {
  const std::int64_t lim =
      static_cast<std::int64_t>(std::sqrt(B / (d < 0 ? 1.0 : 1.0 - d * T * T))) + 2;
  long double total = 0;
  auto inside = [&](std::int64_t a, std::int64_t b) { return static_cast<long double>(b) < T * static_cast<long double>(a); };
  for (std::int64_t a = 1; a <= lim; ++a)
    for (std::int64_t b = 1; b <= lim; ++b) {
      if (!inside(a, b)) continue;
      const __int128 n1 = oracle::qnorm(d, a, b);
      if (n1 > static_cast<__int128>(B)) continue;
      for (std::int64_t c = 1; a + c <= lim; ++c)
        for (std::int64_t e = 1; b + e <= lim; ++e) {
          if (!inside(c, e)) continue;
          const __int128 n2 = oracle::qnorm(d, a + c, b + e);
          if (n2 > static_cast<__int128>(B)) continue;
          total += std::pow(static_cast<long double>(n1), -s1) * std::pow(static_cast<long double>(n2), -s2);
        }
    }
  return static_cast<double>(total);
}

}  // namespace

TEST_CASE("window counts match direct enumeration") {
  const NormForm f({0, 0, 2});
  const std::uint64_t M = 30000;
  const std::vector<int> tenths = {0, 3, 7, 10, 12};
  std::vector<double> cuts;
  for (int t : tenths) cuts.push_back(t / 10.0);
  std::vector<std::uint64_t> expect(tenths.size() - 1, 0);
  for (std::int64_t a = 1; a < 40; ++a)
    for (std::int64_t b = 1; b < 60; ++b) {
      const __int128 v = oracle::eval({1, 0, 0, 2}, a, b);
      if (v >= static_cast<__int128>(M) || !oracle::prime_value(v)) continue;
      for (std::size_t j = 0; j + 1 < tenths.size(); ++j)
        if (10 * b >= tenths[j] * a && 10 * b < tenths[j + 1] * a) ++expect[j];
    }
  CHECK(decile_counts(f, M, cuts) == expect);
  CHECK(count_primes_in_window(f, M, SlopeWindow{0.3, 0.7}) == expect[1]);
}

TEST_CASE("property: window counts are additive") {
  const NormForm f({0, 0, 0, 11});
  const std::vector<double> cuts = {0.1, 0.25, 0.5, 0.8};
  const auto parts = decile_counts(f, 2'000'000, cuts);
  CHECK(count_primes_in_window(f, 2'000'000, SlopeWindow{0.1, 0.8}) == parts[0] + parts[1] + parts[2]);
  CHECK(count_primes_in_window(f, 1'000'000, SlopeWindow{0.1, 0.8}) <= parts[0] + parts[1] + parts[2]);
}

TEST_CASE("window counter guards") {
  CHECK_THROWS_AS(decile_counts(NormForm({0, 1}), std::uint64_t{1} << 50, std::vector<double>{0, 1}), RangeError);
  CHECK_THROWS_AS(decile_counts(NormForm({0, -2}), 1000, std::vector<double>{0, 0.8}), DomainError);
  CHECK_THROWS_AS(decile_counts(NormForm({0, 1}), 1000, std::vector<double>{0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(decile_counts(NormForm({0, 1}), 1000, std::vector<double>{0.5}), DomainError);
  CHECK_THROWS_AS(SlopeWindow({-0.1, 1}).validate(), DomainError);
}

TEST_CASE("split primes in a cone match direct enumeration") {
  for (std::int64_t d : {-1, -2, -7, -13, 2, 3, 13}) {
    const QuadraticRing r(d);
    for (auto [lo, hi] : {std::pair{kStep, 2 * kStep}, std::pair{0.05, 0.61}}) {
      const Cone c = Cone::sector(r, lo, hi);
      CHECK(count_split_primes_in_cone(r, 40000, c) == oracle::split_primes(d, 40000, lo, hi, true));
      CHECK(count_split_primes_in_cone(r, 40000, c, {}, false) == oracle::split_primes(d, 40000, lo, hi, false));
    }
  }
}

TEST_CASE("pair counts match direct enumeration in norm mode") {
  for (std::int64_t d : {-1, -7, 2, 3}) {
    const auto got = pair_counts_nested(QuadraticRing(d), 3000, 5);
    CHECK(got == oracle::nested_pairs(d, 3000, 5, false));
  }
}

TEST_CASE("pair counts match direct enumeration in coordinate mode") {
  for (std::int64_t d : {-2, 2, 3}) {
    const auto got = pair_counts_nested(QuadraticRing(d), 40, 4, {}, PairBoundMode::coordinate);
    CHECK(got == oracle::nested_pairs(d, 40, 4, true));
  }
}

TEST_CASE("single cone pair count equals the last nested count") {
  const QuadraticRing r(-1);
  const auto nested = pair_counts_nested(r, 5000, 3);
  const auto pc = count_pairs_in_cone(r, 5000, Cone::sector(r, kStep, 4 * kStep));
  CHECK(pc.count == nested.back());
  CHECK(pc.norm_bound == 5000);
}

TEST_CASE("property: nested counts are nondecreasing and grow with the bound") {
  const QuadraticRing r(-1);
  const auto small = pair_counts_nested(r, 20000, 8);
  const auto large = pair_counts_nested(r, 40000, 8);
  for (std::size_t k = 1; k < small.size(); ++k) CHECK(small[k] >= small[k - 1]);
  for (std::size_t k = 0; k < small.size(); ++k) CHECK(large[k] >= small[k]);
  CHECK(PairCounter::nested(std::vector<std::uint64_t>{3, 0, 2}) == std::vector<std::uint64_t>{3, 3, 5});
}

TEST_CASE("property: results do not depend on the worker count") {
  const QuadraticRing r(-7);
  const auto one = pair_counts_nested(r, 60000, 6, ExecOptions{1, {}});
  CHECK(pair_counts_nested(r, 60000, 6, ExecOptions{3, {}}) == one);
  CHECK(pair_counts_nested(r, 60000, 6, ExecOptions{8, {}}) == one);
  const NormForm f({0, 0, 2});
  const std::vector<double> cuts = {0, 0.2, 0.4, 0.6};
  CHECK(decile_counts(f, 1'000'000, cuts, ExecOptions{4, {}}) == decile_counts(f, 1'000'000, cuts));
  const double z1 = zeta_discrete(QuadraticRing(-1), 1.0, 2, 2, 3000, ExecOptions{1, {}});
  CHECK(zeta_discrete(QuadraticRing(-1), 1.0, 2, 2, 3000, ExecOptions{5, {}}) == z1);
}

TEST_CASE("progress events cover every shard") {
  std::atomic<std::uint64_t> points{0};
  std::atomic<int> events{0};
  ExecOptions opts{2, [&](const ProgressEvent& e) {
                     points += e.points;
                     ++events;
                   }};
  const QuadraticRing r(-1);
  count_split_primes_in_cone(r, 100000, Cone::sector(r, 0.1, 0.2), opts);
  CHECK(events.load() > 1);
  CHECK(points.load() > 0);
}

TEST_CASE("discrete double zeta matches direct summation") {
  CHECK(zeta_discrete(QuadraticRing(-1), 0.77, 2, 2, 400) == doctest::Approx(brute_zeta(-1, 0.77, 2, 2, 400)).epsilon(1e-12));
  CHECK(zeta_discrete(QuadraticRing(-1), std::numeric_limits<double>::infinity(), 1.5, 1.5, 300) ==
        doctest::Approx(brute_zeta(-1, 1e9, 1.5, 1.5, 300)).epsilon(1e-12));
  CHECK(zeta_discrete(QuadraticRing(-3), 0.31, 1, 2, 500) == doctest::Approx(brute_zeta(-3, 0.31, 1, 2, 500)).epsilon(1e-12));
  CHECK(zeta_discrete(QuadraticRing(2), 0.53, 2, 2, 500) == doctest::Approx(brute_zeta(2, 0.53, 2, 2, 500)).epsilon(1e-12));
}

TEST_CASE("discrete double zeta domain") {
  CHECK_THROWS_AS(zeta_discrete(QuadraticRing(-1), 1, 1.5, 1.0, 100), DivergenceError);
  CHECK_THROWS_AS(zeta_discrete(QuadraticRing(-1), 1, 0.5, 1.5, 100), DivergenceError);
  CHECK_THROWS_AS(zeta_discrete(QuadraticRing(2), 0.8, 2, 2, 100), DomainError);
  CHECK_THROWS_AS(zeta_discrete(QuadraticRing(-1), 1, 2, 2, 1), DomainError);
}

TEST_CASE("property: cone membership agrees with the angle") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> coord(1, 5000);
  for (std::int64_t d : {-1, -5, 3, 11}) {
    const QuadraticRing r(d);
    const Cone c = Cone::sector(r, 0.13, 0.47);
    for (int i = 0; i < 5000; ++i) {
      const std::int64_t a = coord(rng), b = coord(rng);
      if (d > 0 && b * b * d >= a * a) continue;
      const long double t = oracle::angle(d, a, b);
      CHECK(c.contains(r, a, b) == (t > 0.13L && t < 0.47L));
    }
  }
}

TEST_CASE("slope side and cone edges") {
  CHECK(slope_side(10, 3, 0.3L) == 0);
  CHECK(slope_side(10, 4, 0.3L) == 1);
  CHECK(slope_side(10, 2, 0.3L) == -1);
  const QuadraticRing g(-1);
  const Cone c = Cone::sector(g, 0.0, std::numbers::pi / 4);
  CHECK_FALSE(c.contains(g, 5, 5));
  CHECK(c.contains(g, 5, 4));
  CHECK_FALSE(c.contains(g, 5, 0));
  CHECK(static_cast<double>(c.slope_hi(g)) == doctest::Approx(1.0));
  CHECK(static_cast<double>(Cone::sector(QuadraticRing(3), 0, 0.5).slope_hi(QuadraticRing(3))) ==
        doctest::Approx(std::tanh(0.5) / std::sqrt(3.0)));
}

TEST_CASE("cone validation") {
  CHECK_THROWS_AS(Cone::sector(QuadraticRing(-1), 0.2, 0.1), DomainError);
  CHECK_THROWS_AS(Cone::sector(QuadraticRing(-1), 0.2, 1.6), DomainError);
  CHECK_THROWS_AS((Cone{KernelKind::circular, 0.1, 0.2}.check_ring(QuadraticRing(2))), ConfigError);
  const QuadraticRing r(-1);
  CHECK_THROWS_AS(count_split_primes_in_cone(r, kMaxNormBound + 1, Cone::sector(r, 0.1, 0.2)), RangeError);
  CHECK_THROWS_AS(pair_counts_nested(r, 1000, 0), DomainError);
  CHECK_THROWS_AS(PairCounter(r, 1000, KernelKind::circular, 0.1, {0.3, 0.2}), DomainError);
}

TEST_CASE("shard plan depends only on the task") {
  const QuadraticRing r(-1);
  SplitPrimeCounter task(r, 1'000'000, {Cone::sector(r, 0.1, 0.2)});
  const auto plan = plan_shards(task);
  CHECK(plan.size() == 256);
  CHECK(plan.front().a_lo == 1);
  CHECK(plan.back().a_hi == task.a_end());
  for (std::size_t i = 1; i < plan.size(); ++i) CHECK(plan[i].a_lo == plan[i - 1].a_hi);
  std::vector<ShardTally> tallies = run_shards(task, plan, {}, [](std::size_t i) { return i % 2 == 0; });
  std::vector<ShardTally> rest = run_shards(task, plan, {}, [](std::size_t i) { return i % 2 == 1; });
  for (std::size_t i = 0; i < plan.size(); ++i)
    if (tallies[i].empty()) tallies[i] = rest[i];
  CHECK(sum_tallies(tallies, 1) == run_count(task, {}));
}

TEST_CASE("parallel_for_index propagates the first exception") {
  std::atomic<int> ran{0};
  CHECK_THROWS_AS(parallel_for_index(100, 4,
                                     [&](std::size_t i) {
                                       ++ran;
                                       if (i == 10) throw ResourceError("boom");
                                     }),
                  ResourceError);
  std::vector<int> seen(50, 0);
  parallel_for_index(50, 3, [&](std::size_t i) { seen[i] = 1; });
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("prime oracle switches to Miller-Rabin above the bitmap range") {
  const PrimeOracle small(1000);
  CHECK(small.uses_bitmap());
  CHECK(small(997));
  const PrimeOracle large(std::uint64_t{1} << 40);
  CHECK_FALSE(large.uses_bitmap());
  CHECK(large(1000000007));
}
