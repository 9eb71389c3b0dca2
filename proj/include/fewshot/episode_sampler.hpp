#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "fewshot/class_index.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/random.hpp"

namespace fewshot {

enum class SamplerMode { fixed, varied };

struct IntRange {
  int lo = 0;
  int hi = 0;
  bool operator==(const IntRange&) const = default;
};

/// N-way k-shot episode configuration.
///
/// Fixed mode uses `n_way` and `k_shot` for every episode. Varied mode draws
/// N from `n_range` (clamped by the number of eligible classes) and a single
/// shot count from `k_range` (clamped by the smallest chosen class) per
/// episode. Both modes draw `q_queries` queries per class.
struct SamplerConfig {
  SamplerMode mode = SamplerMode::fixed;
  int n_way = 5;
  int k_shot = 1;
  int q_queries = 15;
  IntRange n_range{5, 50};
  IntRange k_range{1, 100};
  std::uint64_t episodes = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (q_queries < 1) throw ConfigError("q_queries must be >= 1");
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
    if (mode == SamplerMode::fixed) {
      if (n_way < 2) throw ConfigError("n_way must be >= 2");
      if (k_shot < 1) throw ConfigError("k_shot must be >= 1");
    } else {
      if (n_range.lo < 2 || n_range.lo > n_range.hi) {
        throw ConfigError("n_range must satisfy 2 <= lo <= hi");
      }
      if (k_range.lo < 1 || k_range.lo > k_range.hi) {
        throw ConfigError("k_range must satisfy 1 <= lo <= hi");
      }
    }
  }

  bool operator==(const SamplerConfig&) const = default;
};

struct EpisodeItem {
  std::size_t position;  // row in the store
  std::size_t slot;      // class slot in [0, N)
  bool operator==(const EpisodeItem&) const = default;
};

/// One sampled task. Support and query lists are grouped by slot, slot 0
/// first.
struct Episode {
  std::size_t episode_index = 0;
  std::vector<std::string> class_ids;
  // Parallel to class_ids: the class' position in the ClassIndex.
  std::vector<std::size_t> class_rows;
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;
  std::size_t k = 0;

  std::size_t n_way() const { return class_ids.size(); }
  bool operator==(const Episode&) const = default;
};

struct EpisodeShape {
  std::size_t n_way;
  std::size_t k_shot;
  bool operator==(const EpisodeShape&) const = default;
};

namespace detail {

struct ClassDraw {
  std::vector<std::size_t> classes;  // ClassIndex rows, in slot order
  std::size_t k;
};

inline std::vector<std::size_t> eligible_classes(const ClassIndex& index, std::size_t min_size) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < index.num_classes(); ++c) {
    if (index.bucket(c).size() >= min_size) out.push_back(c);
  }
  return out;
}

// Draw order: N, then the classes, then k. Shares the caller's stream so
// the item draws that follow stay tied to the same sub-seed.
inline ClassDraw draw_classes(Rng& rng, const SamplerConfig& cfg, const ClassIndex& index) {
  const auto q = static_cast<std::size_t>(cfg.q_queries);
  ClassDraw draw;
  if (cfg.mode == SamplerMode::fixed) {
    const auto n = static_cast<std::size_t>(cfg.n_way);
    const auto k = static_cast<std::size_t>(cfg.k_shot);
    auto eligible = eligible_classes(index, k + q);
    if (eligible.size() < n) {
      throw SamplingError(fmt::format(
          "insufficient classes: {}-way episodes need {} classes with >= {} items, found {}",
          n, n, k + q, eligible.size()));
    }
    partial_shuffle(rng, std::span(eligible), n);
    eligible.resize(n);
    draw.classes = std::move(eligible);
    draw.k = k;
    return draw;
  }

  const auto k_lo = static_cast<std::size_t>(cfg.k_range.lo);
  auto eligible = eligible_classes(index, k_lo + q);
  const auto n_lo = static_cast<std::size_t>(cfg.n_range.lo);
  const auto n_hi = std::min(static_cast<std::size_t>(cfg.n_range.hi), eligible.size());
  if (n_hi < n_lo) {
    throw SamplingError(fmt::format(
        "dataset too small for varied config: need >= {} classes with >= {} items, found {}",
        n_lo, k_lo + q, eligible.size()));
  }
  const auto n = static_cast<std::size_t>(
      uniform_int(rng, static_cast<std::int64_t>(n_lo), static_cast<std::int64_t>(n_hi)));
  partial_shuffle(rng, std::span(eligible), n);
  eligible.resize(n);

  std::size_t smallest = index.bucket(eligible.front()).size();
  for (auto c : eligible) smallest = std::min(smallest, index.bucket(c).size());
  const auto k_hi = std::min(static_cast<std::size_t>(cfg.k_range.hi), smallest - q);
  if (k_hi < k_lo) {
    throw SamplingError("dataset too small for varied config");
  }
  draw.k = static_cast<std::size_t>(
      uniform_int(rng, static_cast<std::int64_t>(k_lo), static_cast<std::int64_t>(k_hi)));
  draw.classes = std::move(eligible);
  return draw;
}

}  // namespace detail

/// Varied-mode (N, k) for a given episode sub-seed. Matches the shape that
/// `sample_episode` realizes for the same sub-seed.
inline EpisodeShape sample_varied_shape(std::uint64_t sub_seed, const SamplerConfig& cfg,
                                        const ClassIndex& index) {
  if (cfg.mode != SamplerMode::varied) {
    throw ConfigError("sample_varied_shape requires varied mode");
  }
  cfg.validate();
  Rng rng(sub_seed);
  const auto draw = detail::draw_classes(rng, cfg, index);
  return {draw.classes.size(), draw.k};
}

/// Episode `episode_index` of the stream seeded by `master_seed`. A pure
/// function of its arguments.
inline Episode sample_episode(std::size_t episode_index, const SamplerConfig& cfg,
                              const ClassIndex& index, std::uint64_t master_seed) {
  cfg.validate();
  Rng rng(episode_seed(master_seed, episode_index));
  auto draw = detail::draw_classes(rng, cfg, index);
  const auto q = static_cast<std::size_t>(cfg.q_queries);

  Episode ep;
  ep.episode_index = episode_index;
  ep.k = draw.k;
  ep.class_rows = draw.classes;
  ep.class_ids.reserve(draw.classes.size());
  ep.support.reserve(draw.classes.size() * draw.k);
  ep.query.reserve(draw.classes.size() * q);

  std::vector<std::size_t> pool;
  const std::uint64_t item_seed = rng();
  for (std::size_t slot = 0; slot < draw.classes.size(); ++slot) {
    const auto c = draw.classes[slot];
    ep.class_ids.push_back(index.label(c));
    const auto& bucket = index.bucket(c);
    if (bucket.size() < draw.k + q) {
      throw SamplingError(fmt::format("class '{}' has {} items, episode needs {}",
                                      index.label(c), bucket.size(), draw.k + q));
    }
    // Own stream per slot, queries drawn before support: the query set does
    // not depend on k.
    Rng item_rng(episode_seed(item_seed, slot));
    pool.assign(bucket.begin(), bucket.end());
    partial_shuffle(item_rng, std::span(pool), q + draw.k);
    for (std::size_t i = 0; i < q; ++i) ep.query.push_back({pool[i], slot});
    for (std::size_t i = q; i < q + draw.k; ++i) ep.support.push_back({pool[i], slot});
  }
  return ep;
}

/// Audit line: {"episode", "classes", "support", "query", "k"}.
inline nlohmann::ordered_json episode_to_json(const Episode& ep) {
  nlohmann::ordered_json j;
  j["episode"] = ep.episode_index;
  j["classes"] = ep.class_ids;
  auto positions = [](const std::vector<EpisodeItem>& items) {
    std::vector<std::size_t> out;
    out.reserve(items.size());
    for (const auto& it : items) out.push_back(it.position);
    return out;
  };
  j["support"] = positions(ep.support);
  j["query"] = positions(ep.query);
  j["k"] = ep.k;
  return j;
}

}  // namespace fewshot
