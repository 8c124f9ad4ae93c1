#include <doctest.h>

#include "normprimes/errors.hpp"
#include "normprimes/primality.hpp"
#include "oracles.hpp"

using namespace normprimes;

TEST_CASE("is_prime agrees with trial division below 200000") {
  for (std::uint64_t n = 0; n < 200000; ++n) REQUIRE(is_prime(n) == oracle::prime(n));
}

TEST_CASE("strong pseudoprimes and large primes") {
  CHECK_FALSE(is_prime(2047));
  CHECK_FALSE(is_prime(3215031751ULL));
  CHECK_FALSE(is_prime(3825123056546413051ULL));
  CHECK_FALSE(is_prime(561));
  CHECK(is_prime(18446744073709551557ULL));  // largest 64-bit prime
  CHECK_FALSE(is_prime(18446744073709551615ULL));
  CHECK(is_prime(1000000007ULL));
  CHECK(is_prime(2305843009213693951ULL));
  CHECK_FALSE(is_prime(2305843009213693953ULL));
}

TEST_CASE("large values agree with trial division") {
  for (std::uint64_t n = 1'000'000'000'000ULL; n < 1'000'000'000'000ULL + 2000; ++n)
    REQUIRE(is_prime(n) == oracle::prime(n));
}

TEST_CASE("sieve matches is_prime") {
  const auto bm = sieve_upto(1'000'000);
  CHECK(bm.limit() == 1'000'000);
  for (std::uint64_t n = 0; n <= 1'000'000; ++n) REQUIRE(bm.contains(n) == is_prime(n));
  CHECK_FALSE(bm.contains(1'000'003));
}

TEST_CASE("sieve counts across segment boundaries") {
  std::uint64_t expected = 0;
  const std::uint64_t limit = 3 * (1u << 18) + 12345;
  for (std::uint64_t n = 0; n <= limit; ++n) expected += oracle::prime(n);
  CHECK(sieve_upto(limit).count() == expected);
  CHECK(sieve_upto(2).count() == 1);
  CHECK(sieve_upto(0).count() == 0);
  CHECK(sieve_upto(10).count() == 4);
  CHECK(sieve_upto(3).count() == 2);
}

TEST_CASE("sieve guard") { CHECK_THROWS_AS(sieve_upto(kSieveLimitGuard + 1), ResourceError); }
