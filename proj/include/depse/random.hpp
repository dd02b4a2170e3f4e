#pragma once

#include <cstdint>
#include <random>

#include "depse/field.hpp"

namespace depse {

/// Seeded random stream. Every consumer owns its own instance; runs are
/// bit-reproducible given the seed and the order of draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }

  /// Circularly symmetric N_C(0, 1): real and imaginary parts each N(0, 1/2).
  cplx complex_normal() {
    constexpr double kHalf = 0.70710678118654752440;
    const double re = normal();
    const double im = normal();
    return {kHalf * re, kHalf * im};
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Independent stream derived from (seed, stream) via seed_seq mixing.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::uint64_t mixed = 0;
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  mixed = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  return Rng(mixed);
}

/// Field of i.i.d. N_C(0, 1) draws, filled in storage order.
Spectrogram complex_noise(Shape shape, Rng& rng);

}  // namespace depse
