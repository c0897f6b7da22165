#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "chn/errors.hpp"

namespace chn {

// Row-major dense matrix. Rows are handed out as spans so kernels never see
// raw pointers.
template <typename T>
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return values_.empty(); }

  std::span<T> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  T& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  std::span<T> flat() noexcept { return values_; }
  std::span<const T> flat() const noexcept { return values_; }

  void append_row(std::span<const T> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw ShapeError("append_row: row length mismatch");
    values_.insert(values_.end(), values.begin(), values.end());
    ++rows_;
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

using Matrix = DenseMatrix<double>;
using LabelMatrix = DenseMatrix<std::uint8_t>;

// Gathers the listed rows into a new matrix.
template <typename T>
DenseMatrix<T> select_rows(const DenseMatrix<T>& m, std::span<const std::size_t> indices) {
  DenseMatrix<T> out(indices.size(), m.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= m.rows()) throw IndexError("select_rows: index out of range");
    auto src = m.row(indices[r]);
    auto dst = out.row(r);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c];
  }
  return out;
}

}  // namespace chn
