#pragma once

// Synthetic stores for demos and tests: each class sits on its own
// coordinate axis, items are that axis plus isotropic Gaussian noise,
// renormalized.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include <fmt/format.h>

#include "fewshot/embedding_store.hpp"
#include "fewshot/random.hpp"

namespace fewshot::synthetic {

/// Standard normal via Box-Muller on the portable uniform stream.
inline double gaussian(Rng& rng) {
  constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * kScale;  // (0, 1]
  const double u2 = static_cast<double>(rng() >> 11) * kScale;          // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::string class_label(std::size_t c) { return fmt::format("class_{:03}", c); }

struct PrototypeSpec {
  std::size_t num_classes = 20;
  std::size_t items_per_class = 20;
  std::size_t dim = 32;  // must be >= num_classes for orthogonal prototypes
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_name = "synth";
};

inline void fill_row(Rng& rng, std::span<float> row, std::size_t axis, double sigma) {
  for (std::size_t d = 0; d < row.size(); ++d) {
    double v = d == axis ? 1.0 : 0.0;
    if (sigma > 0.0) v += sigma * gaussian(rng);
    row[d] = static_cast<float>(v);
  }
}

/// Image store: `items_per_class` noisy copies of each class prototype.
inline EmbeddingStore prototype_image_store(const PrototypeSpec& spec) {
  EmbeddingStore s;
  s.dim = spec.dim;
  s.modality = Modality::image;
  s.dataset_name = spec.dataset_name;
  s.model_id = "synthetic-prototypes";
  s.values.resize(spec.num_classes * spec.items_per_class * spec.dim);
  s.items.reserve(spec.num_classes * spec.items_per_class);
  Rng rng(mix64(spec.seed));
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t i = 0; i < spec.items_per_class; ++i) {
      const auto pos = s.items.size();
      s.items.push_back({fmt::format("img_{:03}_{:05}", c, i), class_label(c), std::nullopt});
      fill_row(rng, s.row(pos), c % spec.dim, spec.noise_sigma);
    }
  }
  return normalize(s);
}

/// Text store: `templates` noisy prompt embeddings per class prototype.
inline EmbeddingStore prototype_text_store(const PrototypeSpec& spec, std::size_t templates) {
  EmbeddingStore s;
  s.dim = spec.dim;
  s.modality = Modality::text;
  s.dataset_name = spec.dataset_name;
  s.model_id = "synthetic-prototypes";
  s.values.resize(spec.num_classes * templates * spec.dim);
  Rng rng(mix64(spec.seed ^ 0x7465787400000000ull));
  for (std::size_t c = 0; c < spec.num_classes; ++c) {
    for (std::size_t t = 0; t < templates; ++t) {
      const auto pos = s.items.size();
      s.items.push_back({fmt::format("txt_{:03}_{:02}", c, t), class_label(c),
                         fmt::format("template_{:02}", t)});
      fill_row(rng, s.row(pos), c % spec.dim, spec.noise_sigma);
    }
  }
  return normalize(s);
}

}  // namespace fewshot::synthetic
