#pragma once

// Reproducible random numbers.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. The standard distributions are not, so uniform, normal and integer
// draws are derived here from the raw 64-bit output. Independent substreams are
// obtained by hashing (seed, stream name, indices) through SplitMix64.

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <utility>

namespace gmr3 {

inline constexpr std::string_view kRngName = "mt19937_64+splitmix64-substreams";

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for the substream identified by `stream` and up to two indices.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

  /// Uniform integer in [0, n), unbiased.
  std::uint64_t below(std::uint64_t n);

  template <class It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      std::uint64_t j = below(i);
      using std::swap;
      swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace gmr3
