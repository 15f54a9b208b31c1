#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "kantorel/rational.hpp"

namespace kantorel {

/// Counter-based pseudo-random generator. Each draw mixes
/// (seed, stream, counter) through the splitmix64 finalizer, so draw k of
/// any substream is reproducible without generating its predecessors and
/// substreams never overlap by construction.
class Prng {
public:
  explicit Prng(uint64_t seed, uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  /// Independent substream; used to give each sampling site and each
  /// simulated trajectory its own generator.
  Prng substream(uint64_t idx) const {
    return Prng(seed_, mix(stream_ ^ 0x9e3779b97f4a7c15ULL, idx));
  }

  uint64_t next_u64() { return mix(mix(seed_, stream_), counter_++); }

  /// Uniform in [0, n) by rejection; unbiased.
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw std::runtime_error("next_below(0)");
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// True with probability p (exact rational comparison against a uniform
  /// 64-bit draw scaled into [0, 1)).
  bool next_bernoulli(const Rat& p) {
    if (p <= 0) return false;
    if (p >= 1) return true;
    Rat u(Int(next_u64()), Int(1) << 64);
    return u < p;
  }

  uint64_t counter() const { return counter_; }

private:
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by the generator.
template <typename T>
void shuffle(std::vector<T>& v, Prng& g) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = g.next_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace kantorel
