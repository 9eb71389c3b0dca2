// fewshot: validate embedding stores, dump sampled episodes, run episodic
// evaluations and print reports.
//
// Exit codes: 0 success, 1 usage/config, 2 data validation, 3 runtime.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "fewshot/fewshot.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

fewshot::RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw fewshot::ConfigError(fmt::format("cannot open config '{}'", path));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw fewshot::ConfigError(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
  }
  return fewshot::run_config_from_json(j, std::filesystem::path(path).parent_path());
}

int cmd_validate(const std::string& path) {
  fewshot::EmbeddingStore store;
  try {
    store = fewshot::read_store(path);
  } catch (const std::exception& e) {
    fmt::print(stderr, "invalid store {}: {}\n", path, e.what());
    return kExitData;
  }
  const auto index = fewshot::build_class_index(store);
  fmt::print("valid store {}\n", path);
  fmt::print("  modality:   {}\n", fewshot::to_string(store.modality));
  fmt::print("  dim:        {}\n", store.dim);
  fmt::print("  count:      {}\n", store.count());
  fmt::print("  classes:    {}\n", index.num_classes());
  fmt::print("  dataset:    {}\n", store.dataset_name);
  fmt::print("  model:      {}\n", store.model_id);
  fmt::print("  normalized: {}\n", store.normalized);
  return kExitOk;
}

int cmd_sample(const std::string& config_path, std::size_t count,
               std::optional<std::uint64_t> seed) {
  auto cfg = load_config(config_path);
  if (seed) cfg.sampler.seed = *seed;
  cfg.sampler.validate();
  if (cfg.image_store_path.empty()) throw fewshot::ConfigError("image store required");
  const auto store = fewshot::read_store(cfg.image_store_path);
  const auto index = fewshot::build_class_index(store);
  for (std::size_t e = 0; e < count; ++e) {
    const auto ep = fewshot::sample_episode(e, cfg.sampler, index, cfg.sampler.seed);
    std::cout << fewshot::episode_to_json(ep).dump() << '\n';
  }
  return kExitOk;
}

struct EvalOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::int64_t> episodes;
  std::optional<unsigned> parallelism;
  std::optional<std::string> out;
  std::optional<std::string> csv;
  bool timing = false;
};

int cmd_eval(const std::string& config_path, const EvalOverrides& o) {
  auto cfg = load_config(config_path);
  if (o.seed) cfg.sampler.seed = *o.seed;
  if (o.method) cfg.method = fewshot::parse_method(*o.method);
  if (o.episodes) {
    if (*o.episodes < 1) throw fewshot::ConfigError("episodes must be >= 1");
    cfg.sampler.episodes = static_cast<std::uint64_t>(*o.episodes);
  }
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (o.out) cfg.output_path = *o.out;
  if (o.csv) cfg.csv_path = *o.csv;
  cfg.validate();

  auto report = fewshot::run_evaluation(cfg);
  fmt::print(stderr, "evaluated {} episodes in {:.3f} s\n", report.episodes,
             report.wall_time_seconds);
  if (!o.timing) report.wall_time_seconds = 0.0;
  if (!cfg.output_path.empty()) fewshot::write_report(report, cfg.output_path);
  if (cfg.csv_path) fewshot::write_episode_csv(report, *cfg.csv_path);
  fmt::print("{}\n", fewshot::summary_line(report));
  return kExitOk;
}

int cmd_report(const std::string& path) {
  const auto r = fewshot::read_report(path);
  const auto& c = r.config_echo;
  fmt::print("{}\n", fewshot::summary_line(r));
  fmt::print("  episodes:     {}\n", r.episodes);
  fmt::print("  mean:         {:.6f}\n", r.mean_accuracy);
  fmt::print("  ci95:         {:.6f} (1.96 * sample std / sqrt(E))\n", r.ci95_half_width);
  if (c.sampler.mode == fewshot::SamplerMode::fixed) {
    fmt::print("  sampler:      fixed {}-way {}-shot, {} queries/class\n", c.sampler.n_way,
               c.sampler.k_shot, c.sampler.q_queries);
  } else {
    fmt::print("  sampler:      varied N in [{}, {}], k in [{}, {}], {} queries/class\n",
               c.sampler.n_range.lo, c.sampler.n_range.hi, c.sampler.k_range.lo,
               c.sampler.k_range.hi, c.sampler.q_queries);
  }
  fmt::print("  seed:         {}\n", c.sampler.seed);
  fmt::print("  temperature:  {}\n", c.temperature);
  fmt::print("  image store:  {}\n", c.image_store_path);
  if (c.text_store_path) fmt::print("  text store:   {}\n", *c.text_store_path);
  if (r.wall_time_seconds > 0.0) fmt::print("  wall time:    {:.3f} s\n", r.wall_time_seconds);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Episodic few-shot evaluation over precomputed embedding stores"};
  app.require_subcommand(1);

  std::string store_path;
  auto* validate = app.add_subcommand("validate", "Check a store file against all invariants");
  validate->add_option("store", store_path, "Store file")->required();

  std::string config_path;
  std::size_t count = 0;
  std::optional<std::uint64_t> sample_seed;
  auto* sample = app.add_subcommand("sample", "Dump sampled episodes as JSON lines");
  sample->add_option("--config", config_path, "Run config (JSON)")->required();
  sample->add_option("--count", count, "Number of episodes to dump")->required();
  sample->add_option("--seed", sample_seed, "Override the sampler seed");

  EvalOverrides overrides;
  auto* eval = app.add_subcommand("eval", "Run an episodic evaluation");
  eval->add_option("--config", config_path, "Run config (JSON)")->required();
  eval->add_option("--seed", overrides.seed, "Override the sampler seed");
  eval->add_option("--method", overrides.method, "visual|textual|stacked_max|stacked_avg");
  eval->add_option("--episodes", overrides.episodes, "Override the episode count");
  eval->add_option("--parallelism", overrides.parallelism, "Worker threads");
  eval->add_option("--out", overrides.out, "Report output path");
  eval->add_option("--csv", overrides.csv, "Per-episode CSV output path");
  eval->add_flag("--timing", overrides.timing, "Record wall time in the report file");

  std::string report_path;
  auto* report = app.add_subcommand("report", "Pretty-print a report file");
  report->add_option("--in", report_path, "Report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*validate) return cmd_validate(store_path);
    if (*sample) return cmd_sample(config_path, count, sample_seed);
    if (*eval) return cmd_eval(config_path, overrides);
    if (*report) return cmd_report(report_path);
  } catch (const fewshot::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kExitConfig;
  } catch (const fewshot::DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}
