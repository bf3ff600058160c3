#include "tbf/sparse.hpp"

#include <algorithm>
#include <stdexcept>

namespace tbf {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols) {
  for (const auto& e : entries)
    if (e.row >= rows || e.col >= cols) throw std::out_of_range("sparse entry outside matrix bounds");
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  row_ptr_.assign(rows + 1, 0);
  for (std::size_t p = 0; p < entries.size();) {
    std::size_t q = p;
    double sum = 0.0;
    while (q < entries.size() && entries[q].row == entries[p].row && entries[q].col == entries[p].col)
      sum += entries[q++].value;
    if (sum != 0.0) {
      cols_idx_.push_back(entries[p].col);
      values_.push_back(sum);
      ++row_ptr_[entries[p].row + 1];
    }
    p = q;
  }
  for (std::size_t r = 0; r < rows; ++r) row_ptr_[r + 1] += row_ptr_[r];
}

double SparseMatrix::at(std::size_t row, std::size_t col) const {
  for (std::size_t p = row_ptr_[row]; p < row_ptr_[row + 1]; ++p)
    if (cols_idx_[p] == col) return values_[p];
  return 0.0;
}

double SparseMatrix::row_sum(std::size_t row) const {
  double sum = 0.0;
  for (std::size_t p = row_ptr_[row]; p < row_ptr_[row + 1]; ++p) sum += values_[p];
  return sum;
}

void SparseMatrix::left_multiply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != rows_ || out.size() != cols_) throw std::invalid_argument("dimension mismatch in v * A");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < rows_; ++r) {
    const double w = v[r];
    if (w == 0.0) continue;
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out[cols_idx_[p]] += w * values_[p];
  }
}

Vector SparseMatrix::left_multiply(std::span<const double> v) const {
  Vector out(cols_);
  left_multiply(v, out);
  return out;
}

Vector SparseMatrix::right_multiply(std::span<const double> x) const {
  if (x.size() != cols_) throw std::invalid_argument("dimension mismatch in A * x");
  Vector out(rows_, 0.0);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out[r] += values_[p] * x[cols_idx_[p]];
  return out;
}

std::vector<SparseMatrix::Entry> SparseMatrix::entries() const {
  std::vector<Entry> out;
  out.reserve(values_.size());
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) out.push_back({r, cols_idx_[p], values_[p]});
  return out;
}

}  // namespace tbf
