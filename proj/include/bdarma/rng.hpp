#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bdarma {

/// Seeded 64-bit Mersenne Twister with independent streams.
///
/// Streams are derived by mixing (seed, stream) through SplitMix64 before
/// seeding the engine, so `Rng(s, 0)` and `Rng(s, 1)` are unrelated sequences.
class Rng {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t state = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    std::seed_seq seq{split(state), split(state), split(state), split(state)};
    engine_.seed(seq);
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    } while (u == 0.0);
    return u;
  }

  double normal() { return normal_(engine_); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }

 private:
  static std::uint32_t split(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return static_cast<std::uint32_t>((z ^ (z >> 31)) >> 16);
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace bdarma
