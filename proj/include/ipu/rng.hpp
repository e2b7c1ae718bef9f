#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace ipu {

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

/// Counter-based generator. A (seed, stream) pair fixes the whole sequence, so
/// independent consumers take separate streams and stay reproducible no matter
/// how the call sites interleave.
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  Rng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(mix64(seed) ^ (kGolden * (stream + 1)))) {}

  std::uint64_t next_u64() {
    ctr_ += 1;
    return mix64(key_ + ctr_ * kGolden);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [0, 1), 24-bit resolution.
  float next_float() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Unbiased integer in [0, bound); bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Two independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair() {
    // (0, 1] keeps the log argument positive.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  double normal() { return normal_pair().first; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

/// Stream ids used across the project; keeping them in one table avoids
/// accidental reuse.
enum class Stream : std::uint64_t {
  kWeights = 1,
  kData = 2,
  kShuffle = 3,
  kMinibatch = 4,
  kAugment = 5,
  kCorpus = 6,
  kHeldout = 7,
};

inline Rng make_rng(std::uint64_t seed, Stream s) {
  return Rng(seed, static_cast<std::uint64_t>(s));
}

/// Salted variant for families of streams (one per batch, per model, ...).
inline Rng make_rng(std::uint64_t seed, Stream s, std::uint64_t salt) {
  return Rng(seed, static_cast<std::uint64_t>(s) + ((salt + 1) << 16));
}

}  // namespace ipu
