#pragma once

#include <cstdint>
#include <cmath>

namespace jscc {

// Deterministic, platform-independent RNG. std::mt19937_64 is portable but
// the standard distributions are not, so uniform/gaussian are hand-rolled.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // splitmix-style warmup so nearby seeds diverge immediately
    next_u64();
    next_u64();
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in [lo,hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [0,n)
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
  }

 private:
  uint64_t state_;
};

// Mixes an arbitrary number of 64-bit words into one seed, so independent
// streams can be derived from (master seed, coordinates) pairs.
inline uint64_t mix_seed(uint64_t a) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename... Rest>
inline uint64_t mix_seed(uint64_t a, uint64_t b, Rest... rest) {
  return mix_seed(mix_seed(a) ^ (b * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL),
                  rest...);
}

}  // namespace jscc
