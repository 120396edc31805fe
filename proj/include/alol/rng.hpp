#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace alol {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// SplitMix64 output function (Steele, Lea & Flood; Vigna's constants).
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Fixed-increment SplitMix64 stream. Every draw helper is defined here so
/// that sequences are bit-identical across standard libraries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGoldenGamma;
    return splitmix64_mix(state_);
  }
  constexpr std::uint64_t operator()() noexcept { return next(); }
  static constexpr std::uint64_t min() noexcept { return 0; }
  static constexpr std::uint64_t max() noexcept {
    return std::numeric_limits<std::uint64_t>::max();
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform01();
  }

  /// Unbiased integer in [0, n) by rejection; n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() noexcept {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  constexpr std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

/// Stream identifiers mixed into every derived seed.
enum class Purpose : std::uint64_t {
  Split = 0,
  Sampling = 1,
  Init = 2,
  Shuffle = 3,
  PolicyDraw = 4,
};

/// Reserved candidate slots for models that are not candidate fine-tunes.
inline constexpr std::uint64_t kBaseModelSlot = 0xFFFFFFFFULL;
inline constexpr std::uint64_t kCheckpointSlot = 0xFFFFFFFEULL;
inline constexpr std::uint64_t kFinalModelSlot = 0xFFFFFFFDULL;

/// Derived seed for one stochastic call:
///   h = mix(master + gamma); then for v in (iteration, candidate, run, tag):
///   h = mix(h ^ mix(v + gamma)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t iteration,
                                    std::uint64_t candidate, std::uint64_t run,
                                    Purpose purpose) noexcept {
  std::uint64_t h = splitmix64_mix(master + kGoldenGamma);
  for (std::uint64_t v : {iteration, candidate, run, static_cast<std::uint64_t>(purpose)}) {
    h = splitmix64_mix(h ^ splitmix64_mix(v + kGoldenGamma));
  }
  return h;
}

/// Fisher-Yates shuffle driven by a SplitMix64 stream.
template <class RandomIt>
void shuffle(RandomIt first, RandomIt last, SplitMix64& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const auto j = rng.uniform_below(i);
    using std::swap;
    swap(first[i - 1], first[j]);
  }
}

}  // namespace alol
