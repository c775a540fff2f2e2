#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace hydemic {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used both to derive independent seed streams and as
// the counter-based hash behind reproducible per-pixel noise.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return splitmix64(mix_seed(seed, a) ^ splitmix64(b + 0x6A09E667F3BCC909ull));
}

// Uniform in [0, 1) with the full 53-bit mantissa.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform in (0, 1]; safe as a log() argument.
inline double uniform01_open_below(uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Standard normal via Box-Muller. Implemented by hand so that streams are
// bit-reproducible across standard libraries (std::normal_distribution is
// implementation-defined). Consumes two engine draws per variate.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform01_open_below(rng());
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Counter-based standard normal: the draw for (seed, pixel, band) depends
// only on those values, never on evaluation order, so noisy cubes are
// reproducible under any pixel schedule.
inline double counter_normal(uint64_t seed, uint64_t pixel, uint64_t band) {
  const uint64_t h1 = splitmix64(mix_seed(seed, pixel, band));
  const uint64_t h2 = splitmix64(h1 ^ 0x9E3779B97F4A7C15ull);
  const double u1 = uniform01_open_below(h1);
  const double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace hydemic
