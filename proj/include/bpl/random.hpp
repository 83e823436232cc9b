#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace bpl {

// Derives an independent seed for a named substream. splitmix64 mixing keeps
// streams decorrelated even for adjacent (seed, stream, index) triples.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1) + 0xbf58476d1ce4e5b9ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic random source. All transforms are written out explicitly so a
// fixed seed yields the same stream on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; no state is carried between calls.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n). Rejection-free modulo bias is irrelevant at
  // the n values used here (n << 2^64), but reject anyway to stay exact.
  std::uint64_t integer(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return v % n;
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[integer(i)]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

// Stream tags for substream derivation.
enum SeedStream : std::uint64_t {
  kStreamClassPeaks = 1,
  kStreamSampleNoise = 2,
  kStreamEpochShuffle = 3,
  kStreamModelInit = 4,
  kStreamBasisInit = 5,
  kStreamSplit = 6,
  kStreamFactorizationInit = 7,
};

}  // namespace bpl
