#pragma once

// Episodic evaluation: sample episodes, classify each episode's queries with
// the selected method, and aggregate per-episode accuracy.

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "fewshot/class_index.hpp"
#include "fewshot/embedding_store.hpp"
#include "fewshot/episode_sampler.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/inference.hpp"
#include "fewshot/run_config.hpp"

namespace fewshot {

/// Prompt-mean representation of every class in a text store. Textual
/// representations do not depend on the episode, so they are built once.
class TextRepresentationCache {
 public:
  TextRepresentationCache() = default;

  explicit TextRepresentationCache(const EmbeddingStore& text_store) {
    const auto index = build_class_index(text_store);
    for (std::size_t c = 0; c < index.num_classes(); ++c) {
      const auto& bucket = index.bucket(c);
      Matrix prompts(bucket.size(), text_store.dim);
      for (std::size_t r = 0; r < bucket.size(); ++r) {
        const auto src = text_store.row(bucket[r]);
        auto dst = prompts.row(r);
        for (std::size_t d = 0; d < src.size(); ++d) dst[d] = src[d];
      }
      reps_.emplace(index.label(c), textual_representation(prompts));
    }
    dim_ = text_store.dim;
  }

  std::size_t size() const { return reps_.size(); }
  std::size_t dim() const { return dim_; }
  bool contains(const std::string& label) const { return reps_.contains(label); }

  const std::vector<double>& at(const std::string& label) const {
    auto it = reps_.find(label);
    if (it == reps_.end()) {
      throw DataError(fmt::format("text store has no class '{}'", label));
    }
    return it->second;
  }

 private:
  std::unordered_map<std::string, std::vector<double>> reps_;
  std::size_t dim_ = 0;
};

/// Read-only inputs an episode is evaluated against.
struct EvaluationInputs {
  const EmbeddingStore* images = nullptr;
  const TextRepresentationCache* text = nullptr;  // required unless visual
};

namespace detail {

inline Matrix gather_rows(const EmbeddingStore& store, const std::vector<EpisodeItem>& items,
                          std::size_t begin, std::size_t end) {
  Matrix m(end - begin, store.dim);
  for (std::size_t r = begin; r < end; ++r) {
    const auto src = store.row(items[r].position);
    auto dst = m.row(r - begin);
    for (std::size_t d = 0; d < src.size(); ++d) dst[d] = src[d];
  }
  return m;
}

inline ClassRepresentationSet visual_reps(const Episode& ep, const EmbeddingStore& images) {
  ClassRepresentationSet reps;
  reps.class_ids = ep.class_ids;
  reps.source = RepresentationSource::visual_centroid;
  reps.vectors = Matrix(ep.n_way(), images.dim);
  // Support is slot-grouped: slot s occupies [s*k, (s+1)*k).
  for (std::size_t s = 0; s < ep.n_way(); ++s) {
    const auto centroid = visual_representation(gather_rows(images, ep.support, s * ep.k, (s + 1) * ep.k));
    std::copy(centroid.begin(), centroid.end(), reps.vectors.row(s).begin());
  }
  return reps;
}

inline ClassRepresentationSet textual_reps(const Episode& ep, const TextRepresentationCache& text) {
  ClassRepresentationSet reps;
  reps.class_ids = ep.class_ids;
  reps.source = RepresentationSource::textual_prompt_mean;
  reps.vectors = Matrix(ep.n_way(), text.dim());
  for (std::size_t s = 0; s < ep.n_way(); ++s) {
    const auto& v = text.at(ep.class_ids[s]);
    std::copy(v.begin(), v.end(), reps.vectors.row(s).begin());
  }
  return reps;
}

inline PredictionBatch distribution(const Episode& ep, const Matrix& queries,
                                    const ClassRepresentationSet& reps, double temperature) {
  PredictionBatch b;
  b.query_positions.reserve(ep.query.size());
  for (const auto& q : ep.query) b.query_positions.push_back(q.position);
  b.class_ids = ep.class_ids;
  b.scores = similarity_matrix(queries, reps);
  b.probabilities = softmax_rows(b.scores, temperature);
  b.log_probabilities = log_softmax_rows(b.scores, temperature);
  b.temperature = temperature;
  return b;
}

}  // namespace detail

/// Query distributions for one episode under `method`.
inline PredictionBatch episode_predictions(const Episode& ep, const EvaluationInputs& in,
                                           Method method, double temperature) {
  const Matrix queries = detail::gather_rows(*in.images, ep.query, 0, ep.query.size());
  if (method == Method::visual) {
    return detail::distribution(ep, queries, detail::visual_reps(ep, *in.images), temperature);
  }
  if (in.text == nullptr) throw ConfigError("text store required");
  auto textual = detail::distribution(ep, queries, detail::textual_reps(ep, *in.text), temperature);
  if (method == Method::textual) return textual;
  const auto visual = detail::distribution(ep, queries, detail::visual_reps(ep, *in.images), temperature);
  return fuse(visual, textual, method == Method::stacked_max ? FusionMode::max : FusionMode::avg);
}

/// Fraction of the episode's queries whose predicted slot is the true slot.
inline double evaluate_episode(const Episode& ep, const EvaluationInputs& in, Method method,
                               double temperature) {
  const auto batch = episode_predictions(ep, in, method, temperature);
  const auto pred = predict(batch.log_probabilities);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == ep.query[i].slot) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ep.query.size());
}

struct Aggregate {
  double mean;
  double ci95_half_width;
};

/// Mean and 1.96 * sample_std / sqrt(E); a single episode has half-width 0.
inline Aggregate aggregate(const std::vector<double>& per_episode) {
  if (per_episode.empty()) throw std::invalid_argument("aggregate of an empty list");
  const auto e = static_cast<double>(per_episode.size());
  double sum = 0.0;
  for (double a : per_episode) sum += a;
  const double mean = sum / e;
  if (per_episode.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double a : per_episode) sq += (a - mean) * (a - mean);
  const double std = std::sqrt(sq / (e - 1.0));
  return {mean, 1.96 * std / std::sqrt(e)};
}

struct EvaluationReport {
  std::vector<double> per_episode_accuracy;
  double mean_accuracy = 0.0;
  double ci95_half_width = 0.0;
  std::size_t episodes = 0;
  RunConfig config_echo;
  double wall_time_seconds = 0.0;
  // Realized (N, k) per episode; feeds the CSV export, not the JSON report.
  std::vector<EpisodeShape> episode_shapes;
};

/// Runs `body(i)` for i in [0, count) on `workers` threads. Results must be
/// written to per-index slots; the exception from the lowest failing index is
/// rethrown.
template <typename Body>
void parallel_for_episodes(std::size_t count, unsigned workers, Body&& body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Evaluates `config.sampler.episodes` episodes over already-loaded stores.
/// Output is identical for every parallelism degree.
inline EvaluationReport run_evaluation(const RunConfig& config, const EmbeddingStore& images,
                                       const EmbeddingStore* text_store) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  if (images.modality != Modality::image) throw DataError("image store has text modality");

  const auto index = build_class_index(images);
  std::optional<TextRepresentationCache> cache;
  if (needs_text_store(config.method)) {
    if (text_store == nullptr) throw ConfigError("text store required");
    if (text_store->modality != Modality::text) throw DataError("text store has image modality");
    if (text_store->dim != images.dim) {
      throw DataError(fmt::format("dimension mismatch: image store {} vs text store {}",
                                  images.dim, text_store->dim));
    }
    cache.emplace(*text_store);
    for (const auto& label : index.labels()) {
      if (!cache->contains(label)) {
        throw DataError(fmt::format("text store has no class '{}'", label));
      }
    }
  }

  const EvaluationInputs inputs{&images, cache ? &*cache : nullptr};
  const auto count = static_cast<std::size_t>(config.sampler.episodes);
  EvaluationReport report;
  report.per_episode_accuracy.assign(count, 0.0);
  report.episode_shapes.assign(count, EpisodeShape{0, 0});
  parallel_for_episodes(count, config.parallelism, [&](std::size_t e) {
    const auto ep = sample_episode(e, config.sampler, index, config.sampler.seed);
    report.per_episode_accuracy[e] = evaluate_episode(ep, inputs, config.method, config.temperature);
    report.episode_shapes[e] = {ep.n_way(), ep.k};
  });

  const auto agg = aggregate(report.per_episode_accuracy);
  report.mean_accuracy = agg.mean;
  report.ci95_half_width = agg.ci95_half_width;
  report.episodes = count;
  report.config_echo = config;
  if (report.config_echo.dataset.empty()) report.config_echo.dataset = images.dataset_name;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

/// Loads the stores named in `config` and evaluates.
inline EvaluationReport run_evaluation(const RunConfig& config) {
  config.validate();
  const auto images = read_store(config.image_store_path);
  std::optional<EmbeddingStore> text;
  if (needs_text_store(config.method)) text = read_store(*config.text_store_path);
  return run_evaluation(config, images, text ? &*text : nullptr);
}

inline nlohmann::ordered_json to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  j["per_episode_accuracy"] = r.per_episode_accuracy;
  j["mean_accuracy"] = r.mean_accuracy;
  j["ci95_half_width"] = r.ci95_half_width;
  j["episodes"] = r.episodes;
  j["config_echo"] = to_json(r.config_echo);
  j["wall_time_seconds"] = r.wall_time_seconds;
  return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  try {
    EvaluationReport r;
    r.per_episode_accuracy = j.at("per_episode_accuracy").get<std::vector<double>>();
    r.mean_accuracy = j.at("mean_accuracy").get<double>();
    r.ci95_half_width = j.at("ci95_half_width").get<double>();
    r.episodes = j.at("episodes").get<std::size_t>();
    r.config_echo = run_config_from_json(j.at("config_echo"));
    r.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("malformed report: {}", e.what()));
  }
}

inline void write_report(const EvaluationReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out << to_json(r).dump(2) << '\n';
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

inline EvaluationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("report is not valid JSON: {}", e.what()));
  }
  return report_from_json(j);
}

/// `episode,accuracy,n,k` rows.
inline void write_episode_csv(const EvaluationReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out << "episode,accuracy,n,k\n";
  for (std::size_t e = 0; e < r.per_episode_accuracy.size(); ++e) {
    const auto shape = e < r.episode_shapes.size() ? r.episode_shapes[e] : EpisodeShape{0, 0};
    out << fmt::format("{},{},{},{}\n", e, r.per_episode_accuracy[e], shape.n_way, shape.k_shot);
  }
}

/// "<method> <dataset>: 98.48 ± 0.04" (percentages, two decimals).
inline std::string summary_line(const EvaluationReport& r) {
  return fmt::format("{} {}: {:.2f} ± {:.2f}", to_string(r.config_echo.method),
                     r.config_echo.dataset, r.mean_accuracy * 100.0, r.ci95_half_width * 100.0);
}

}  // namespace fewshot
