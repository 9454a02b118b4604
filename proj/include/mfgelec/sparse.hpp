#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

namespace mfgelec {

/// Compressed sparse row matrix.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t row, col;
    double value;
  };

  SparseMatrix() = default;

  /// Duplicate (row, col) entries are summed; exact zeros are dropped.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries)
      : rows_(rows), cols_(cols), offsets_(rows + 1, 0) {
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    for (std::size_t k = 0; k < entries.size();) {
      const auto [r, c, v0] = entries[k];
      double v = v0;
      std::size_t j = k + 1;
      while (j < entries.size() && entries[j].row == r && entries[j].col == c) v += entries[j++].value;
      if (v != 0.0) {
        cols_idx_.push_back(c);
        values_.push_back(v);
        ++offsets_[r + 1];
      }
      k = j;
    }
    for (std::size_t r = 0; r < rows_; ++r) offsets_[r + 1] += offsets_[r];
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  template <class F>
  void for_row(std::size_t r, F&& f) const {
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) f(cols_idx_[k], values_[k]);
  }

  double at(std::size_t r, std::size_t c) const {
    for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k)
      if (cols_idx_[k] == c) return values_[k];
    return 0.0;
  }

  std::vector<double> multiply(std::span<const double> x) const {
    std::vector<double> y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      double s = 0.0;
      for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) s += values_[k] * x[cols_idx_[k]];
      y[r] = s;
    }
    return y;
  }

  std::vector<double> transpose_multiply(std::span<const double> y) const {
    std::vector<double> x(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = offsets_[r]; k < offsets_[r + 1]; ++k) x[cols_idx_[k]] += values_[k] * y[r];
    return x;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::size_t> cols_idx_;
  std::vector<double> values_;
};

}  // namespace mfgelec
