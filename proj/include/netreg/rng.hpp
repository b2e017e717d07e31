#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

#include "netreg/normal.hpp"

namespace netreg {

// Philox4x32-10 counter-based generator. A stream is identified by
// (seed, stream id); draws within a stream walk the 64-bit counter, so any
// replicate can be generated independently of execution order. This is what
// makes parallel Monte Carlo runs byte-reproducible.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0, 0, static_cast<std::uint32_t>(stream),
             static_cast<std::uint32_t>(stream >> 32)},
        buf_pos_(4) {}

  // Derives a stream id by mixing tag words (splitmix64 finalizer chain).
  static std::uint64_t derive(std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t t : tags) {
      h ^= mix(t + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
    return h;
  }

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  std::uint64_t next_u64() {
    std::uint64_t lo = next_u32();
    std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // Uniform on the open interval (0,1); safe as a quantile-function argument.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform on [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo is fine here: n is tiny relative to 2^64.
    return next_u64() % n;
  }

  // Standard normal via inverse CDF; one uniform per draw keeps the counter
  // discipline simple.
  double normal() { return norm_quantile(uniform()); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static void round(std::array<std::uint32_t, 4>& x,
                    const std::array<std::uint32_t, 2>& k) {
    constexpr std::uint64_t m0 = 0xD2511F53ULL;
    constexpr std::uint64_t m1 = 0xCD9E8D57ULL;
    const std::uint64_t p0 = m0 * x[0];
    const std::uint64_t p1 = m1 * x[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
  }

  void refill() {
    std::array<std::uint32_t, 4> x = ctr_;
    std::array<std::uint32_t, 2> k = key_;
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        k[0] += 0x9E3779B9u;
        k[1] += 0xBB67AE85u;
      }
      round(x, k);
    }
    buf_ = x;
    buf_pos_ = 0;
    if (++ctr_[0] == 0) ++ctr_[1];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> buf_;
  int buf_pos_;
};

}  // namespace netreg
