#pragma once

// Class representations, cosine similarity, temperature softmax, and
// late fusion of probability distributions. All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "fewshot/matrix.hpp"

namespace fewshot {

/// Default softmax temperature (logit scale 100).
inline constexpr double kDefaultTemperature = 0.01;

enum class RepresentationSource { visual_centroid, textual_prompt_mean };

struct ClassRepresentationSet {
  std::vector<std::string> class_ids;
  Matrix vectors;  // one row per class, same order as class_ids
  RepresentationSource source = RepresentationSource::visual_centroid;

  std::size_t size() const { return class_ids.size(); }
};

enum class FusionMode { max, avg };

/// Per-query distributions over one episode's classes.
struct PredictionBatch {
  std::vector<std::size_t> query_positions;
  std::vector<std::string> class_ids;
  Matrix scores;         // raw cosine similarities, Q x N
  Matrix probabilities;  // softmax or fused, Q x N
  // Log-domain counterpart of `probabilities` (see fuse_log for the avg
  // offset). Computed without going through `probabilities`, so rows that
  // saturate at p == 1.0 in double stay ordered; predictions use this.
  Matrix log_probabilities;
  double temperature = kDefaultTemperature;
};

namespace detail {

inline std::vector<double> mean_rows(const Matrix& rows) {
  if (rows.rows() == 0) throw std::invalid_argument("empty input: no rows to average");
  std::vector<double> mean(rows.cols(), 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto row = rows.row(r);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
  }
  const double inv = 1.0 / static_cast<double>(rows.rows());
  for (double& v : mean) v *= inv;
  return mean;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> inverse_row_norms(const Matrix& m, const char* side) {
  std::vector<double> inv(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double n = std::sqrt(dot(m.row(r), m.row(r)));
    if (!(n >= 1e-12)) {
      throw std::invalid_argument(fmt::format("zero-norm {} row {}", side, r));
    }
    inv[r] = 1.0 / n;
  }
  return inv;
}

}  // namespace detail

/// Centroid of the support rows of one class. Not renormalized.
inline std::vector<double> visual_representation(const Matrix& support_vectors) {
  return detail::mean_rows(support_vectors);
}

/// Mean of one class' prompt embeddings. Not renormalized.
inline std::vector<double> textual_representation(const Matrix& prompt_vectors) {
  return detail::mean_rows(prompt_vectors);
}

/// Q x N cosine similarities. Both sides are normalized here, so inputs need
/// not be unit norm.
inline Matrix similarity_matrix(const Matrix& queries, const ClassRepresentationSet& reps) {
  const Matrix& r = reps.vectors;
  if (r.rows() != reps.class_ids.size()) {
    throw std::invalid_argument("representation rows do not match class count");
  }
  if (queries.cols() != r.cols()) {
    throw std::invalid_argument(fmt::format("dimension mismatch: queries have {}, representations {}",
                                            queries.cols(), r.cols()));
  }
  const auto inv_q = detail::inverse_row_norms(queries, "query");
  const auto inv_r = detail::inverse_row_norms(r, "representation");
  Matrix out(queries.rows(), r.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    const auto qrow = queries.row(i);
    for (std::size_t j = 0; j < r.rows(); ++j) {
      const double cos = detail::dot(qrow, r.row(j)) * inv_q[i] * inv_r[j];
      out(i, j) = std::clamp(cos, -1.0, 1.0);
    }
  }
  return out;
}

/// Row-wise softmax(scores / temperature), with row-max subtraction.
inline Matrix softmax_rows(const Matrix& scores, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument(fmt::format("temperature must be > 0, got {}", temperature));
  }
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto in = scores.row(i);
    auto row = out.row(i);
    double top = -INFINITY;
    for (double s : in) {
      if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
      top = std::max(top, s);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      row[j] = std::exp((in[j] - top) / temperature);
      total += row[j];
    }
    for (double& p : row) p /= total;
  }
  return out;
}

/// Row-wise log(softmax(scores / temperature)). The top entry is
/// -log1p(sum of the other exponentials), so log-probabilities near 0 keep
/// full relative precision even when the probability rounds to 1.
inline Matrix log_softmax_rows(const Matrix& scores, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument(fmt::format("temperature must be > 0, got {}", temperature));
  }
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto in = scores.row(i);
    auto row = out.row(i);
    std::size_t top = 0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      if (!std::isfinite(in[j])) throw std::invalid_argument("non-finite score");
      if (in[j] > in[top]) top = j;
    }
    double rest = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      row[j] = (in[j] - in[top]) / temperature;
      if (j != top) rest += std::exp(row[j]);
    }
    const double log_total = std::log1p(rest);
    for (double& v : row) v -= log_total;
  }
  return out;
}

/// Class-wise combination of two distributions over the same queries and
/// classes. `avg` keeps rows normalized; `max` is returned unnormalized.
inline Matrix fuse(const Matrix& visual, const Matrix& textual, FusionMode mode) {
  if (visual.rows() != textual.rows() || visual.cols() != textual.cols()) {
    throw std::invalid_argument(fmt::format("shape mismatch: {}x{} vs {}x{}", visual.rows(),
                                            visual.cols(), textual.rows(), textual.cols()));
  }
  Matrix out(visual.rows(), visual.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double a = visual(i, j);
      const double b = textual(i, j);
      out(i, j) = mode == FusionMode::max ? std::max(a, b) : 0.5 * (a + b);
    }
  }
  return out;
}

/// `fuse` on log-probabilities: log(max(p, q)) for max, log(p + q) for avg.
/// The avg result omits the constant -log 2; adding it would round away the
/// small magnitudes that order saturated rows, and argmax ignores it.
inline Matrix fuse_log(const Matrix& visual, const Matrix& textual, FusionMode mode) {
  if (visual.rows() != textual.rows() || visual.cols() != textual.cols()) {
    throw std::invalid_argument(fmt::format("shape mismatch: {}x{} vs {}x{}", visual.rows(),
                                            visual.cols(), textual.rows(), textual.cols()));
  }
  Matrix out(visual.rows(), visual.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double hi = std::max(visual(i, j), textual(i, j));
      const double lo = std::min(visual(i, j), textual(i, j));
      out(i, j) = mode == FusionMode::max ? hi : hi + std::log1p(std::exp(lo - hi));
    }
  }
  return out;
}

inline PredictionBatch fuse(const PredictionBatch& visual, const PredictionBatch& textual,
                            FusionMode mode) {
  if (visual.class_ids != textual.class_ids) {
    throw std::invalid_argument("class-order mismatch between fused distributions");
  }
  if (visual.query_positions != textual.query_positions) {
    throw std::invalid_argument("query-order mismatch between fused distributions");
  }
  PredictionBatch out;
  out.query_positions = visual.query_positions;
  out.class_ids = visual.class_ids;
  out.probabilities = fuse(visual.probabilities, textual.probabilities, mode);
  if (!visual.log_probabilities.empty() || !textual.log_probabilities.empty()) {
    out.log_probabilities = fuse_log(visual.log_probabilities, textual.log_probabilities, mode);
  }
  out.temperature = visual.temperature;
  return out;
}

/// Rows rescaled to sum to 1. For reporting max-fused output only; it does
/// not change predictions.
inline Matrix renormalized_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    double total = 0.0;
    for (double v : row) total += v;
    if (total > 0.0) {
      for (double& v : row) v /= total;
    }
  }
  return out;
}

/// Per-row argmax; ties go to the lowest class slot.
inline std::vector<std::size_t> predict(const Matrix& probabilities) {
  std::vector<std::size_t> out(probabilities.rows(), 0);
  for (std::size_t i = 0; i < probabilities.rows(); ++i) {
    const auto row = probabilities.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = best;
  }
  return out;
}

}  // namespace fewshot
