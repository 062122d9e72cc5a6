#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace glbi {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// A generator is identified by (seed, stream). The 64-bit seed is the
/// Philox key; the 128-bit counter holds a 64-bit block index in its low
/// words and the 64-bit stream id in its high words. Distinct streams of
/// one seed therefore never overlap, which makes it safe to hand stream
/// `f` to CV fold `f` or stream `(fold << 32) | position` to one Gibbs
/// replicate and still get results that do not depend on scheduling.
///
/// Satisfies UniformRandomBitGenerator with 32-bit output.
class Philox {
 public:
  using result_type = std::uint32_t;

  explicit Philox(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (lane_ == 4) refill();
    return block_[lane_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;  // 27 bits
    const std::uint64_t lo = (*this)() >> 6;  // 26 bits
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box-Muller; one draw per call, no caching.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  bool coin() { return ((*this)() & 1u) != 0; }

  /// The raw Philox4x32-10 bijection.
  static std::array<std::uint32_t, 4> encrypt(std::array<std::uint32_t, 4> ctr,
                                              std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) {
      round(ctr, key);
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    return ctr;
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // Rejection keeps the result unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
      const std::uint64_t v = (static_cast<std::uint64_t>((*this)()) << 32) | (*this)();
      if (v < limit) return v % bound;
    }
  }

 private:
  static void round(std::array<std::uint32_t, 4>& ctr, const std::array<std::uint32_t, 2>& key) {
    constexpr std::uint64_t kM0 = 0xD2511F53u;
    constexpr std::uint64_t kM1 = 0xCD9E8D57u;
    const std::uint64_t p0 = kM0 * ctr[0];
    const std::uint64_t p1 = kM1 * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }

  void refill() {
    block_ = encrypt({static_cast<std::uint32_t>(counter_),
                      static_cast<std::uint32_t>(counter_ >> 32),
                      static_cast<std::uint32_t>(stream_),
                      static_cast<std::uint32_t>(stream_ >> 32)},
                     key_);
    lane_ = 0;
    ++counter_;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int lane_ = 4;
};

}  // namespace glbi
