#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace csr {

// Single step of the splitmix64 generator: advances `state` by the 64-bit
// golden-ratio constant and returns the mixed output. Used both for seeding
// xoshiro and for deriving independent sub-streams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t splitmix64_once(std::uint64_t state) {
  return splitmix64_next(state);
}

/// Seeded portable random generator (xoshiro256** with splitmix64 seeding).
///
/// The algorithm and constants are fixed so that the same seed produces the
/// same stream on every platform. Uniform doubles take the top 53 bits of one
/// 64-bit output; normals use Box-Muller and consume exactly two uniforms per
/// sample (no caching).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t st = seed;
    for (auto& word : s_) word = splitmix64_next(st);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform in [a, b).
  double next_uniform(double a, double b) { return a + (b - a) * next_double(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t next_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(next_double() * static_cast<double>(n)) % n;
  }

  /// Standard normal via Box-Muller (cosine branch, two uniforms consumed).
  double next_normal() {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Derives an independent stream from the original seed and a stream index:
  /// sub_seed = sm(sm(seed) + stream), where sm is one splitmix64 step.
  /// The derivation is a pure function of (seed, stream), so parallel or
  /// out-of-order consumers see identical streams.
  Rng split(std::uint64_t stream) const {
    return Rng(splitmix64_once(splitmix64_once(seed_) + stream));
  }

  std::uint64_t seed() const { return seed_; }

  std::array<std::uint64_t, 4> state() const { return {s_[0], s_[1], s_[2], s_[3]}; }
  void set_state(const std::array<std::uint64_t, 4>& s) {
    for (int i = 0; i < 4; ++i) s_[i] = s[i];
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_ = 0;
  std::uint64_t s_[4] = {};
};

}  // namespace csr
