#pragma once

// Seeding and sampling helpers with platform-independent output.
//
// std::mt19937_64 is fully specified by the standard, but the standard
// distributions and std::shuffle are not, so bounded draws and shuffles are
// implemented here.

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace fewshot {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed for episode `index` of a run seeded with `master`: the
/// `index + 1`-th output of a SplitMix64 stream started at mix64(master).
/// Any episode can be derived directly, so generation order is irrelevant.
constexpr std::uint64_t episode_seed(std::uint64_t master, std::uint64_t index) {
  constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  return mix64(mix64(master) + (index + 1) * kGamma);
}

/// Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift with
/// rejection, so the result is exactly uniform.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  using u128 = unsigned __int128;
  std::uint64_t x = rng();
  u128 m = static_cast<u128>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      x = rng();
      m = static_cast<u128>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform integer in [lo, hi], lo <= hi.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(uniform_below(rng, span));
}

/// Fisher-Yates over the first `m` slots: afterwards values[0, m) is a
/// uniformly random ordered sample without replacement.
template <typename T, std::size_t Extent>
void partial_shuffle(Rng& rng, std::span<T, Extent> values, std::size_t m) {
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < m && i + 1 < n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, n - i));
    using std::swap;
    swap(values[i], values[j]);
  }
}

}  // namespace fewshot
