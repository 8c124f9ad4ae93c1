#pragma once

#include <cstdint>
#include <vector>

namespace normprimes {

/// Exact for every 64-bit input: trial division by the primes below 100,
/// then strong-pseudoprime rounds on a base set proven sufficient for the
/// size of n (the first 12 primes cover all of [0, 2^64)).
bool is_prime(std::uint64_t n) noexcept;

inline constexpr std::uint64_t kSieveLimitGuard = std::uint64_t{1} << 34;

// Odd-only packed prime table: bit k is set iff 2k+1 is prime.
class PrimeBitmap {
 public:
  PrimeBitmap() = default;

  std::uint64_t limit() const noexcept { return limit_; }

  /// Membership for n <= limit(); values above the limit are reported
  /// as not prime, so callers must size the bitmap for their range.
  bool contains(std::uint64_t n) const noexcept {
    if (n > limit_) return false;
    if ((n & 1) == 0) return n == 2;
    const std::uint64_t k = n >> 1;
    return (words_[k >> 6] >> (k & 63)) & 1;
  }

  std::uint64_t count() const noexcept;
  std::size_t memory_bytes() const noexcept { return words_.size() * sizeof(std::uint64_t); }

 private:
  friend PrimeBitmap sieve_upto(std::uint64_t limit);
  std::uint64_t limit_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Segmented sieve of Eratosthenes over the odd numbers. Throws
/// ResourceError when limit exceeds kSieveLimitGuard.
PrimeBitmap sieve_upto(std::uint64_t limit);

}  // namespace normprimes
