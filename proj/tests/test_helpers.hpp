#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "fewshot/embedding_store.hpp"
#include "fewshot/random.hpp"
#include "fewshot/synthetic.hpp"

namespace testutil {

/// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("fewshot_test_{}_{}", ::getpid(), counter++);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_bytes(const std::filesystem::path& p, std::span<const char> bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

/// Random unit-norm image store with `classes` labels assigned round-robin.
inline fewshot::EmbeddingStore random_store(std::uint64_t seed, std::size_t count, std::size_t dim,
                                            std::size_t classes,
                                            fewshot::Modality modality = fewshot::Modality::image) {
  fewshot::Rng rng(seed);
  fewshot::EmbeddingStore s;
  s.dim = dim;
  s.modality = modality;
  s.dataset_name = fmt::format("random_{}", seed);
  s.model_id = "test";
  s.values.resize(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    std::optional<std::string> tmpl;
    if (modality == fewshot::Modality::text) tmpl = fmt::format("t{}", i / classes);
    s.items.push_back({fmt::format("item_{}", i), fmt::format("c{}", i % classes), tmpl});
    auto row = s.row(i);
    for (auto& v : row) v = static_cast<float>(fewshot::synthetic::gaussian(rng));
  }
  return fewshot::normalize(s);
}

}  // namespace testutil
