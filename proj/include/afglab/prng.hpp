#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace afg {

// Seedable 64-bit generator used everywhere randomness is needed.
// Algorithm identifier recorded in manifests: "splitmix64".
// The update and output mix are the published splitmix64 constants, so the
// stream can be replayed from any language.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 significant bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Bounded draw by modulo; bias is irrelevant at our ranges and the rule is
  // trivially replayable, which the dataset manifests rely on.
  std::uint64_t bounded(std::uint64_t n) { return next() % n; }

  // Basic-form Box-Muller; consumes two uniforms per value.
  double gaussian() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // In-place Fisher-Yates, descending index, j = bounded(i+1).
  template <typename T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

  // Derive an independent stream seed from (seed, tag).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ull * (tag + 1)));
    return g.next();
  }

 private:
  std::uint64_t state_;
};

inline constexpr const char* kPrngIdentifier = "splitmix64";
inline constexpr const char* kShuffleIdentifier = "splitmix64-fisheryates-mod";

}  // namespace afg
