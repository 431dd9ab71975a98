#include "evqp/sparse.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace evqp {

SparseMatrix::SparseMatrix(int n_rows, int n_cols)
    : n_rows_(n_rows), n_cols_(n_cols) {
  if (n_rows < 0 || n_cols < 0)
    throw std::invalid_argument("SparseMatrix: negative dimension");
  row_ptr_.assign(static_cast<std::size_t>(n_rows) + 1, 0);
}

SparseMatrix SparseMatrix::from_triplets(int n_rows, int n_cols,
                                         std::vector<Triplet> entries) {
  for (const Triplet& t : entries) {
    if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
      throw std::invalid_argument(
          "SparseMatrix: triplet index out of range: (" +
          std::to_string(t.row) + ", " + std::to_string(t.col) + ")");
  }
  std::sort(entries.begin(), entries.end(),
            [](const Triplet& a, const Triplet& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });

  SparseMatrix m(n_rows, n_cols);
  std::size_t i = 0;
  while (i < entries.size()) {
    const int r = entries[i].row;
    const int c = entries[i].col;
    double sum = 0.0;
    while (i < entries.size() && entries[i].row == r && entries[i].col == c)
      sum += entries[i++].value;
    if (sum != 0.0) {
      m.col_idx_.push_back(c);
      m.vals_.push_back(sum);
      m.row_ptr_[static_cast<std::size_t>(r) + 1]++;
    }
  }
  for (int r = 0; r < n_rows; ++r)
    m.row_ptr_[static_cast<std::size_t>(r) + 1] +=
        m.row_ptr_[static_cast<std::size_t>(r)];
  return m;
}

double SparseMatrix::coeff(int r, int c) const {
  if (r < 0 || r >= n_rows_ || c < 0 || c >= n_cols_)
    throw std::out_of_range("SparseMatrix::coeff: index out of range");
  const auto begin = col_idx_.begin() + row_ptr_[r];
  const auto end = col_idx_.begin() + row_ptr_[r + 1];
  const auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0;
  return vals_[static_cast<std::size_t>(it - col_idx_.begin())];
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Triplet> t;
  t.reserve(vals_.size());
  for (int r = 0; r < n_rows_; ++r)
    for (std::int64_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i)
      t.push_back({col_idx_[i], r, vals_[i]});
  return from_triplets(n_cols_, n_rows_, std::move(t));
}

std::vector<Triplet> SparseMatrix::to_triplets() const {
  std::vector<Triplet> t;
  t.reserve(vals_.size());
  for (int r = 0; r < n_rows_; ++r)
    for (std::int64_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i)
      t.push_back({r, col_idx_[i], vals_[i]});
  return t;
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> d(static_cast<std::size_t>(n_rows_) * n_cols_, 0.0);
  for (int r = 0; r < n_rows_; ++r)
    for (std::int64_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i)
      d[static_cast<std::size_t>(r) * n_cols_ + col_idx_[i]] = vals_[i];
  return d;
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
  return n_rows_ == other.n_rows_ && n_cols_ == other.n_cols_ &&
         row_ptr_ == other.row_ptr_ && col_idx_ == other.col_idx_;
}

std::vector<double> spmv(const SparseMatrix& m, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != m.n_cols())
    throw std::invalid_argument("spmv: dimension mismatch");
  std::vector<double> y(static_cast<std::size_t>(m.n_rows()), 0.0);
  const auto& rp = m.row_ptr();
  const auto& ci = m.col_idx();
  const auto& v = m.values();
  for (int r = 0; r < m.n_rows(); ++r) {
    double acc = 0.0;
    for (std::int64_t i = rp[r]; i < rp[r + 1]; ++i) acc += v[i] * x[ci[i]];
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

}  // namespace evqp
