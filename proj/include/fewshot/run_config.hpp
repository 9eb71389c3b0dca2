#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include <fmt/format.h>
#include <json.hpp>

#include "fewshot/episode_sampler.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/inference.hpp"

namespace fewshot {

enum class Method { visual, textual, stacked_max, stacked_avg };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::visual: return "visual";
    case Method::textual: return "textual";
    case Method::stacked_max: return "stacked_max";
    case Method::stacked_avg: return "stacked_avg";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "visual") return Method::visual;
  if (s == "textual") return Method::textual;
  if (s == "stacked_max") return Method::stacked_max;
  if (s == "stacked_avg") return Method::stacked_avg;
  throw ConfigError(fmt::format("unknown method '{}'", s));
}

inline bool needs_text_store(Method m) { return m != Method::visual; }
inline bool needs_support_set(Method m) { return m != Method::textual; }

inline std::string_view to_string(SamplerMode m) {
  return m == SamplerMode::fixed ? "fixed" : "varied";
}

inline SamplerMode parse_sampler_mode(std::string_view s) {
  if (s == "fixed") return SamplerMode::fixed;
  if (s == "varied") return SamplerMode::varied;
  throw ConfigError(fmt::format("unknown sampler mode '{}'", s));
}

struct RunConfig {
  Method method = Method::visual;
  SamplerConfig sampler;
  std::string image_store_path;
  std::optional<std::string> text_store_path;
  // Label for printed results; empty means "use the image store's dataset_name".
  std::string dataset;
  double temperature = kDefaultTemperature;
  unsigned parallelism = 1;
  std::string output_path;
  std::optional<std::string> csv_path;

  void validate() const {
    sampler.validate();
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    if (image_store_path.empty()) throw ConfigError("image store required");
    if (needs_text_store(method) && !text_store_path) {
      throw ConfigError(fmt::format("text store required for method '{}'", to_string(method)));
    }
  }

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

template <typename T>
T config_field(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(fmt::format("config field '{}' has wrong type", key));
  }
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string_view>& known,
                                std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError(fmt::format("unknown {} key '{}'", where, key));
    }
  }
}

inline IntRange range_field(const nlohmann::json& j, const char* key, IntRange fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() ||
      !(*it)[1].is_number_integer()) {
    throw ConfigError(fmt::format("config field '{}' must be [lo, hi]", key));
  }
  return {(*it)[0].get<int>(), (*it)[1].get<int>()};
}

inline std::string resolve_path(const std::string& p, const std::filesystem::path& base) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal().string();
}

}  // namespace detail

inline SamplerConfig sampler_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("'sampler' must be an object");
  detail::reject_unknown_keys(
      j, {"mode", "n_way", "k_shot", "q_queries", "n_range", "k_range", "episodes", "seed"},
      "sampler");
  SamplerConfig c;
  c.mode = parse_sampler_mode(detail::config_field<std::string>(j, "mode", "fixed"));
  c.n_way = detail::config_field<int>(j, "n_way", c.n_way);
  c.k_shot = detail::config_field<int>(j, "k_shot", c.k_shot);
  c.q_queries = detail::config_field<int>(j, "q_queries", c.q_queries);
  c.n_range = detail::range_field(j, "n_range", c.n_range);
  c.k_range = detail::range_field(j, "k_range", c.k_range);
  const auto episodes = detail::config_field<std::int64_t>(j, "episodes", 1);
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  c.episodes = static_cast<std::uint64_t>(episodes);
  c.seed = detail::config_field<std::uint64_t>(j, "seed", 0);
  return c;
}

inline nlohmann::ordered_json to_json(const SamplerConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(c.mode);
  j["n_way"] = c.n_way;
  j["k_shot"] = c.k_shot;
  j["q_queries"] = c.q_queries;
  j["n_range"] = {c.n_range.lo, c.n_range.hi};
  j["k_range"] = {c.k_range.lo, c.k_range.hi};
  j["episodes"] = c.episodes;
  j["seed"] = c.seed;
  return j;
}

/// Parses a run configuration. Relative store and output paths are resolved
/// against `base_dir` (normally the config file's directory). The result is
/// not validated; overrides are applied first.
inline RunConfig run_config_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  detail::reject_unknown_keys(j,
                              {"method", "sampler", "image_store_path", "text_store_path",
                               "dataset", "temperature", "parallelism", "output_path",
                               "csv_path"},
                              "config");
  RunConfig c;
  c.method = parse_method(detail::config_field<std::string>(j, "method", "visual"));
  if (auto it = j.find("sampler"); it != j.end()) c.sampler = sampler_config_from_json(*it);
  c.image_store_path = detail::config_field<std::string>(j, "image_store_path", "");
  if (!c.image_store_path.empty()) {
    c.image_store_path = detail::resolve_path(c.image_store_path, base_dir);
  }
  if (auto it = j.find("text_store_path"); it != j.end() && !it->is_null()) {
    c.text_store_path =
        detail::resolve_path(detail::config_field<std::string>(j, "text_store_path", ""), base_dir);
  }
  c.dataset = detail::config_field<std::string>(j, "dataset", "");
  c.temperature = detail::config_field<double>(j, "temperature", c.temperature);
  const auto par = detail::config_field<std::int64_t>(j, "parallelism", 1);
  if (par < 1) throw ConfigError("parallelism must be >= 1");
  c.parallelism = static_cast<unsigned>(par);
  c.output_path = detail::config_field<std::string>(j, "output_path", "");
  if (!c.output_path.empty()) c.output_path = detail::resolve_path(c.output_path, base_dir);
  if (auto it = j.find("csv_path"); it != j.end() && !it->is_null()) {
    c.csv_path =
        detail::resolve_path(detail::config_field<std::string>(j, "csv_path", ""), base_dir);
  }
  return c;
}

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["sampler"] = to_json(c.sampler);
  j["image_store_path"] = c.image_store_path;
  if (c.text_store_path) {
    j["text_store_path"] = *c.text_store_path;
  } else {
    j["text_store_path"] = nullptr;
  }
  j["dataset"] = c.dataset;
  j["temperature"] = c.temperature;
  j["parallelism"] = c.parallelism;
  j["output_path"] = c.output_path;
  if (c.csv_path) {
    j["csv_path"] = *c.csv_path;
  } else {
    j["csv_path"] = nullptr;
  }
  return j;
}

}  // namespace fewshot
