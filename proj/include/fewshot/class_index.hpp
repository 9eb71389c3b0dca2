#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fewshot/embedding_store.hpp"

namespace fewshot {

/// Partition of a store's item positions by class label.
///
/// Classes are ordered lexicographically by label so the index (and every
/// episode sampled from it) does not depend on the order items were
/// exported in. Within a bucket positions keep store order.
class ClassIndex {
 public:
  ClassIndex() = default;

  std::size_t num_classes() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t c) const { return labels_[c]; }
  const std::vector<std::size_t>& bucket(std::size_t c) const { return buckets_[c]; }

  std::optional<std::size_t> find(const std::string& label) const {
    auto it = lookup_.find(label);
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t total_items() const {
    std::size_t n = 0;
    for (const auto& b : buckets_) n += b.size();
    return n;
  }

 private:
  friend ClassIndex build_class_index(const EmbeddingStore& store);

  std::vector<std::string> labels_;
  std::vector<std::vector<std::size_t>> buckets_;
  std::map<std::string, std::size_t, std::less<>> lookup_;
};

inline ClassIndex build_class_index(const EmbeddingStore& store) {
  std::map<std::string, std::vector<std::size_t>, std::less<>> grouped;
  for (std::size_t i = 0; i < store.count(); ++i) {
    grouped[store.items[i].class_label].push_back(i);
  }
  ClassIndex index;
  index.labels_.reserve(grouped.size());
  index.buckets_.reserve(grouped.size());
  for (auto& [label, positions] : grouped) {
    index.lookup_.emplace(label, index.labels_.size());
    index.labels_.push_back(label);
    index.buckets_.push_back(std::move(positions));
  }
  return index;
}

}  // namespace fewshot
