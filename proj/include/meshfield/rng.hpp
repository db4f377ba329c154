#pragma once

#include <cmath>
#include <cstdint>

namespace meshfield {

// splitmix64. Chosen over std::mt19937 + distributions because the standard
// distributions are implementation-defined and runs must be byte-reproducible.
inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Order-sensitive mix of stream identifiers (seed, image, pixel, iteration...).
inline uint64_t hash_mix(uint64_t a, uint64_t b) {
  uint64_t s = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  return splitmix64(s);
}
inline uint64_t hash_mix(uint64_t a, uint64_t b, uint64_t c) {
  return hash_mix(hash_mix(a, b), c);
}
inline uint64_t hash_mix(uint64_t a, uint64_t b, uint64_t c, uint64_t d) {
  return hash_mix(hash_mix(a, b, c), d);
}

class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Stateless-per-call Box-Muller (no cached spare, keeps replay simple).
  double normal() {
    double u1 = uniform(), u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  // Uniform integer in [0, n). n must be > 0; modulo bias is irrelevant for n << 2^64.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  uint64_t state() const { return state_; }

 private:
  uint64_t state_;
};

}  // namespace meshfield
