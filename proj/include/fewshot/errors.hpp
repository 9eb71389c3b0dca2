#pragma once

#include <stdexcept>
#include <string>

namespace fewshot {

/// Malformed or invariant-violating embedding data (files or in-memory stores).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unusable run or sampler configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The sampler cannot build an episode from the given class index.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fewshot
