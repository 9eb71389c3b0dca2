#pragma once

// On-disk container for precomputed embeddings.
//
// Layout (little-endian):
//   [0, 8)        magic "FSEMBED1"
//   [8, 12)       uint32 manifest length M
//   [12, 12 + M)  UTF-8 JSON manifest
//   [12 + M, end) count * dim float32 values, row-major, one row per item

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "fewshot/errors.hpp"

namespace fewshot {

enum class Modality { image, text };

inline std::string_view to_string(Modality m) {
  return m == Modality::image ? "image" : "text";
}

inline Modality parse_modality(std::string_view s) {
  if (s == "image") return Modality::image;
  if (s == "text") return Modality::text;
  throw DataError(fmt::format("unknown modality '{}'", s));
}

struct EmbeddingItem {
  std::string item_id;
  std::string class_label;
  // Set for text stores only: the prompt template that produced the row.
  std::optional<std::string> prompt_template_id;

  bool operator==(const EmbeddingItem&) const = default;
};

/// A single-modality collection of embedding rows plus provenance.
///
/// Plain aggregate; `validate()` checks the invariants and is run by both
/// `write_store` and `read_store`. Treat instances as immutable once built;
/// concurrent readers may share a const store freely.
struct EmbeddingStore {
  std::size_t dim = 0;
  Modality modality = Modality::image;
  std::string dataset_name;
  std::string model_id;
  bool normalized = false;
  std::vector<EmbeddingItem> items;
  // count * dim values, row-major.
  std::vector<float> values;

  static constexpr double kLoadNormTolerance = 1e-5;
  static constexpr double kZeroNorm = 1e-12;

  std::size_t count() const { return items.size(); }

  std::span<const float> row(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  std::span<float> row(std::size_t i) { return {values.data() + i * dim, dim}; }

  /// Throws DataError naming the first violated invariant.
  void validate() const;

  /// Metadata equal and every component bit-identical.
  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim == b.dim && a.modality == b.modality &&
           a.dataset_name == b.dataset_name && a.model_id == b.model_id &&
           a.normalized == b.normalized && a.items == b.items &&
           a.values.size() == b.values.size() &&
           (a.values.empty() ||
            std::memcmp(a.values.data(), b.values.data(),
                        a.values.size() * sizeof(float)) == 0);
  }
};

namespace detail {

inline constexpr std::string_view kStoreMagic = "FSEMBED1";
inline constexpr std::size_t kHeaderBytes = 12;

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

inline std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0x000000FFu) << 24) | ((v & 0x0000FF00u) << 8) |
         ((v & 0x00FF0000u) >> 8) | ((v & 0xFF000000u) >> 24);
}

inline void put_u32_le(std::vector<char>& out, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + 4);
}

inline std::uint32_t get_u32_le(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if constexpr (std::endian::native == std::endian::big) v = byteswap32(v);
  return v;
}

/// Shortest round-trip decimal, always with a fractional part ("5.0").
inline std::string format_real(double v) {
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline double row_norm(std::span<const float> row) {
  double sq = 0.0;
  for (float x : row) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

inline nlohmann::ordered_json manifest_of(const EmbeddingStore& s) {
  nlohmann::ordered_json m;
  m["dim"] = s.dim;
  m["count"] = s.count();
  m["modality"] = to_string(s.modality);
  m["dataset_name"] = s.dataset_name;
  m["model_id"] = s.model_id;
  m["normalized"] = s.normalized;
  auto items = nlohmann::ordered_json::array();
  for (const auto& it : s.items) {
    nlohmann::ordered_json j;
    j["id"] = it.item_id;
    j["class"] = it.class_label;
    if (it.prompt_template_id) {
      j["template_id"] = *it.prompt_template_id;
    } else {
      j["template_id"] = nullptr;
    }
    items.push_back(std::move(j));
  }
  m["items"] = std::move(items);
  return m;
}

/// Serializes without validating. Used by `write_store` after validation and
/// by tests that need to produce deliberately corrupt files.
inline std::vector<char> encode_store_unchecked(const EmbeddingStore& s) {
  const std::string manifest = manifest_of(s).dump();
  std::vector<char> out;
  out.reserve(kHeaderBytes + manifest.size() + s.values.size() * 4);
  out.insert(out.end(), kStoreMagic.begin(), kStoreMagic.end());
  put_u32_le(out, static_cast<std::uint32_t>(manifest.size()));
  out.insert(out.end(), manifest.begin(), manifest.end());
  for (float f : s.values) {
    put_u32_le(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

template <typename T>
T manifest_field(const nlohmann::json& m, const char* key) {
  auto it = m.find(key);
  if (it == m.end()) {
    throw DataError(fmt::format("manifest field '{}' missing", key));
  }
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(fmt::format("manifest field '{}' has wrong type", key));
  }
}

inline EmbeddingStore decode_store(std::span<const char> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw DataError("truncated header");
  }
  if (std::string_view(bytes.data(), kStoreMagic.size()) != kStoreMagic) {
    throw DataError("bad magic");
  }
  const std::uint64_t manifest_len = get_u32_le(bytes.data() + 8);
  if (kHeaderBytes + manifest_len > bytes.size()) {
    throw DataError("manifest length exceeds file size");
  }

  nlohmann::json m;
  try {
    m = nlohmann::json::parse(bytes.begin() + kHeaderBytes,
                              bytes.begin() + kHeaderBytes + manifest_len);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("manifest is not valid JSON: {}", e.what()));
  }
  if (!m.is_object()) throw DataError("manifest is not a JSON object");

  EmbeddingStore s;
  const auto dim = manifest_field<std::int64_t>(m, "dim");
  const auto count = manifest_field<std::int64_t>(m, "count");
  if (dim <= 0) throw DataError(fmt::format("dim must be positive, got {}", dim));
  if (count < 0) throw DataError(fmt::format("count must be non-negative, got {}", count));
  s.dim = static_cast<std::size_t>(dim);
  s.modality = parse_modality(manifest_field<std::string>(m, "modality"));
  s.dataset_name = manifest_field<std::string>(m, "dataset_name");
  s.model_id = manifest_field<std::string>(m, "model_id");
  s.normalized = manifest_field<bool>(m, "normalized");

  const auto items = manifest_field<nlohmann::json>(m, "items");
  if (!items.is_array()) throw DataError("manifest field 'items' has wrong type");
  if (items.size() != static_cast<std::size_t>(count)) {
    throw DataError(fmt::format("count mismatch: manifest count {} but {} items listed",
                                count, items.size()));
  }
  s.items.reserve(items.size());
  for (const auto& j : items) {
    if (!j.is_object()) throw DataError("manifest item is not an object");
    EmbeddingItem it;
    it.item_id = manifest_field<std::string>(j, "id");
    it.class_label = manifest_field<std::string>(j, "class");
    auto t = j.find("template_id");
    if (t != j.end() && !t->is_null()) {
      if (!t->is_string()) throw DataError("manifest field 'template_id' has wrong type");
      it.prompt_template_id = t->get<std::string>();
    }
    s.items.push_back(std::move(it));
  }

  const std::uint64_t payload = bytes.size() - kHeaderBytes - manifest_len;
  std::uint64_t expected = 0;
  if (__builtin_mul_overflow(static_cast<std::uint64_t>(count),
                             static_cast<std::uint64_t>(dim) * 4u, &expected) ||
      payload != expected) {
    throw DataError(fmt::format("payload length mismatch: expected {} bytes, found {}",
                                expected, payload));
  }
  s.values.resize(static_cast<std::size_t>(count) * s.dim);
  const char* p = bytes.data() + kHeaderBytes + manifest_len;
  for (std::size_t i = 0; i < s.values.size(); ++i, p += 4) {
    s.values[i] = std::bit_cast<float>(get_u32_le(p));
  }
  return s;
}

}  // namespace detail

inline void EmbeddingStore::validate() const {
  if (dim == 0) throw DataError("dim must be positive");
  if (values.size() != items.size() * dim) {
    throw DataError(fmt::format("value count {} does not match count*dim = {}",
                                values.size(), items.size() * dim));
  }
  std::unordered_set<std::string_view> seen;
  seen.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (!seen.insert(it.item_id).second) {
      throw DataError(fmt::format("duplicate id '{}'", it.item_id));
    }
    if (it.class_label.empty()) {
      throw DataError(fmt::format("item '{}': empty class label", it.item_id));
    }
    if (modality == Modality::text && !it.prompt_template_id) {
      throw DataError(fmt::format("item '{}': template_id required in a text store", it.item_id));
    }
    if (modality == Modality::image && it.prompt_template_id) {
      throw DataError(fmt::format("item '{}': template_id not allowed in an image store", it.item_id));
    }
    const auto r = row(i);
    for (float x : r) {
      if (!std::isfinite(x)) {
        throw DataError(fmt::format("item '{}': non-finite component", it.item_id));
      }
    }
    if (normalized) {
      const double n = detail::row_norm(r);
      if (std::abs(n - 1.0) > kLoadNormTolerance) {
        throw DataError(fmt::format("item '{}': norm {} exceeds tolerance",
                                    it.item_id, detail::format_real(n)));
      }
    }
  }
}

inline void write_store(const EmbeddingStore& store, const std::filesystem::path& path) {
  store.validate();
  const auto bytes = detail::encode_store_unchecked(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Loads and validates a store. Malformed input is rejected, never repaired.
inline EmbeddingStore read_store(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  auto store = detail::decode_store(bytes);
  store.validate();
  return store;
}

/// Returns a copy with every row scaled to unit norm and `normalized` set.
inline EmbeddingStore normalize(const EmbeddingStore& store) {
  EmbeddingStore out = store;
  for (std::size_t i = 0; i < out.count(); ++i) {
    auto r = out.row(i);
    const double n = detail::row_norm(r);
    if (n < EmbeddingStore::kZeroNorm) {
      throw DataError(fmt::format("zero-norm vector in item '{}'", out.items[i].item_id));
    }
    for (float& x : r) x = static_cast<float>(static_cast<double>(x) / n);
  }
  out.normalized = true;
  return out;
}

}  // namespace fewshot
