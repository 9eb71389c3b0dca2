#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "fewshot/random.hpp"

using namespace fewshot;

// Reference SplitMix64 outputs for state 0 (Vigna's splitmix64.c).
TEST(Random, Mix64MatchesSplitMixReference) {
  constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  EXPECT_EQ(mix64(kGamma), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(mix64(2 * kGamma), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(mix64(3 * kGamma), 0x06C45D188009454Full);
}

TEST(Random, EpisodeSeedIsStreamOffset) {
  constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
  for (std::uint64_t master : {0ull, 1ull, 0xDEADBEEFull}) {
    for (std::uint64_t i = 0; i < 5; ++i) {
      EXPECT_EQ(episode_seed(master, i), mix64(mix64(master) + (i + 1) * kGamma));
    }
  }
}

TEST(Random, EpisodeSeedsDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10'000; ++i) seen.insert(episode_seed(42, i));
  EXPECT_EQ(seen.size(), 10'000u);
  EXPECT_NE(episode_seed(1, 0), episode_seed(2, 0));
}

TEST(Random, Mt19937_64Stability) {
  // Value required of a conforming implementation.
  Rng rng;
  rng.discard(9999);
  EXPECT_EQ(rng(), 9981545732273789042ull);
}

TEST(Random, UniformBelowStaysInRangeAndHitsAll) {
  Rng rng(5);
  std::array<int, 7> hits{};
  for (int i = 0; i < 70'000; ++i) {
    const auto v = uniform_below(rng, 7);
    ASSERT_LT(v, 7u);
    ++hits[v];
  }
  // Binomial(70000, 1/7): sd ~ 92.6; 4 sd band.
  for (int h : hits) EXPECT_NEAR(h, 10'000, 4 * 92.6);
  EXPECT_EQ(uniform_below(rng, 1), 0u);
}

TEST(Random, UniformIntInclusiveBounds) {
  Rng rng(9);
  bool saw_lo = false, saw_hi = false;
  for (int i = 0; i < 1000; ++i) {
    const auto v = uniform_int(rng, -2, 2);
    ASSERT_GE(v, -2);
    ASSERT_LE(v, 2);
    saw_lo |= v == -2;
    saw_hi |= v == 2;
  }
  EXPECT_TRUE(saw_lo && saw_hi);
}

TEST(Random, PartialShuffleIsPermutationPrefix) {
  Rng rng(1);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  partial_shuffle(rng, std::span(v), 10);
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 50u);
  EXPECT_EQ(*s.begin(), 0);
  EXPECT_EQ(*s.rbegin(), 49);
}

TEST(Random, PartialShuffleFirstSlotUniform) {
  std::array<int, 5> hits{};
  Rng rng(77);
  for (int t = 0; t < 50'000; ++t) {
    std::array<int, 5> v{0, 1, 2, 3, 4};
    partial_shuffle(rng, std::span(v), 1);
    ++hits[v[0]];
  }
  // Binomial(50000, 0.2): sd ~ 89.4.
  for (int h : hits) EXPECT_NEAR(h, 10'000, 4 * 89.4);
}
