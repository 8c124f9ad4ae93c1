#include "normprimes/primality.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <string>

#include "normprimes/errors.hpp"

namespace normprimes {

namespace {

constexpr std::array<std::uint32_t, 25> kSmallPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
                                                        43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) noexcept {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

std::uint64_t powmod(std::uint64_t base, std::uint64_t e, std::uint64_t m) noexcept {
  std::uint64_t r = 1;
  base %= m;
  while (e != 0) {
    if (e & 1) r = mulmod(r, base, m);
    base = mulmod(base, base, m);
    e >>= 1;
  }
  return r;
}

bool strong_probable_prime(std::uint64_t n, std::uint64_t base, std::uint64_t d, int s) noexcept {
  std::uint64_t x = powmod(base, d, n);
  if (x == 1 || x == n - 1) return true;
  for (int r = 1; r < s; ++r) {
    x = mulmod(x, x, n);
    if (x == n - 1) return true;
  }
  return false;
}

}  // namespace

bool is_prime(std::uint64_t n) noexcept {
  if (n < 2) return false;
  for (std::uint32_t p : kSmallPrimes) {
    if (n == p) return true;
    if (n % p == 0) return false;
  }
  if (n < 97ULL * 97ULL) return true;

  std::uint64_t d = n - 1;
  const int s = std::countr_zero(d);
  d >>= s;

  // Bounds below which the first k prime bases are deterministic.
  int bases = 12;
  if (n < 3'215'031'751ULL) {
    bases = 4;
  } else if (n < 3'474'749'660'383ULL) {
    bases = 6;
  } else if (n < 341'550'071'728'321ULL) {
    bases = 7;
  } else if (n < 3'825'123'056'546'413'051ULL) {
    bases = 9;
  }
  for (int i = 0; i < bases; ++i) {
    if (!strong_probable_prime(n, kSmallPrimes[i], d, s)) return false;
  }
  return true;
}

std::uint64_t PrimeBitmap::count() const noexcept {
  if (limit_ < 2) return 0;
  std::uint64_t c = 0;
  for (std::uint64_t w : words_) c += static_cast<std::uint64_t>(std::popcount(w));
  return c + 1;  // the prime 2 is not stored
}

PrimeBitmap sieve_upto(std::uint64_t limit) {
  if (limit > kSieveLimitGuard) {
    throw ResourceError("sieve limit " + std::to_string(limit) + " exceeds the 2^34 guard");
  }
  PrimeBitmap bm;
  bm.limit_ = limit;
  const std::uint64_t nbits = (limit + 1) / 2;  // odd numbers 1, 3, ..., <= limit
  bm.words_.assign((nbits + 63) / 64, ~std::uint64_t{0});
  auto clear = [&](std::uint64_t k) { bm.words_[k >> 6] &= ~(std::uint64_t{1} << (k & 63)); };
  // Drop the padding bits past the limit and the number 1.
  for (std::uint64_t k = nbits; k < bm.words_.size() * 64; ++k) clear(k);
  if (nbits > 0) clear(0);
  if (limit < 9) {
    for (std::uint64_t k = 1; k < nbits; ++k) {
      if (!is_prime(2 * k + 1)) clear(k);
    }
    return bm;
  }

  // Base primes up to sqrt(limit) from a small plain sieve.
  const auto root = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(limit))) + 1;
  std::vector<bool> small(root + 1, true);
  std::vector<std::uint64_t> base;
  for (std::uint64_t p = 3; p <= root; p += 2) {
    if (!small[p]) continue;
    base.push_back(p);
    for (std::uint64_t q = p * p; q <= root; q += 2 * p) small[q] = false;
  }

  // Segment over bit indices; each segment touches a cache-sized block.
  constexpr std::uint64_t kSegmentBits = std::uint64_t{1} << 18;
  std::vector<std::uint64_t> next(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) next[i] = (base[i] * base[i]) >> 1;
  for (std::uint64_t seg = 0; seg < nbits; seg += kSegmentBits) {
    const std::uint64_t seg_end = std::min(nbits, seg + kSegmentBits);
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::uint64_t k = next[i];
      const std::uint64_t p = base[i];
      for (; k < seg_end; k += p) clear(k);
      next[i] = k;
    }
  }
  return bm;
}

}  // namespace normprimes
