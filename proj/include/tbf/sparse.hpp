#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tbf {

using Vector = std::vector<double>;

/// Compressed sparse row matrix. Rows are the "from" index, so a
/// distribution propagates as the row vector product v * A.
class SparseMatrix {
 public:
  struct Entry {
    std::size_t row;
    std::size_t col;
    double value;
  };

  SparseMatrix() = default;
  /// Duplicate (row, col) entries are summed; explicit zeros are dropped.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nonzeros() const { return values_.size(); }

  double at(std::size_t row, std::size_t col) const;
  double row_sum(std::size_t row) const;
  std::size_t row_nonzeros(std::size_t row) const { return row_ptr_[row + 1] - row_ptr_[row]; }

  template <typename F>
  void for_each_in_row(std::size_t row, F&& f) const {
    for (std::size_t p = row_ptr_[row]; p < row_ptr_[row + 1]; ++p) f(cols_idx_[p], values_[p]);
  }

  /// out = v * A
  void left_multiply(std::span<const double> v, std::span<double> out) const;
  Vector left_multiply(std::span<const double> v) const;
  /// A * x
  Vector right_multiply(std::span<const double> x) const;

  std::vector<Entry> entries() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> cols_idx_;
  std::vector<double> values_;
};

}  // namespace tbf
