#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace fewshot {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> data() const { return data_; }

  /// Copies float rows into a new matrix; all rows must share one length.
  template <typename Rows>
  static Matrix from_rows(const Rows& rows, std::size_t cols) {
    Matrix m(std::size(rows), cols);
    std::size_t r = 0;
    for (const auto& src : rows) {
      assert(std::size(src) == cols);
      auto dst = m.row(r++);
      std::size_t c = 0;
      for (auto v : src) dst[c++] = static_cast<double>(v);
    }
    return m;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace fewshot
