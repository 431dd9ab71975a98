#pragma once

#include <cstdint>
#include <vector>

namespace evqp {

/// One (row, col, value) entry used to assemble a SparseMatrix.
struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Immutable sparse real matrix in compressed-row (CSR) form.
///
/// Built from triplets; canonicalization sorts entries by (row, col),
/// sums duplicates and drops entries that are exactly zero after summing.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int n_rows, int n_cols);

  /// Canonicalizing constructor; throws std::invalid_argument on
  /// out-of-range indices.
  static SparseMatrix from_triplets(int n_rows, int n_cols,
                                    std::vector<Triplet> entries);

  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  std::int64_t nnz() const { return static_cast<std::int64_t>(vals_.size()); }

  const std::vector<std::int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return vals_; }

  /// Value at (r, c); zero if not stored.
  double coeff(int r, int c) const;

  /// Number of stored entries in row r.
  std::int64_t row_nnz(int r) const { return row_ptr_[r + 1] - row_ptr_[r]; }

  SparseMatrix transposed() const;

  /// Applies f(row, col, value&) to every stored entry; f must not
  /// change the pattern. Used by the scaling code.
  template <typename F>
  SparseMatrix map_values(F&& f) const {
    SparseMatrix out = *this;
    for (int r = 0; r < n_rows_; ++r)
      for (std::int64_t i = row_ptr_[r]; i < row_ptr_[r + 1]; ++i)
        f(r, col_idx_[i], out.vals_[i]);
    return out;
  }

  std::vector<Triplet> to_triplets() const;

  /// Dense row-major copy (tests and small oracles only).
  std::vector<double> to_dense() const;

  bool same_pattern(const SparseMatrix& other) const;

 private:
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::vector<std::int64_t> row_ptr_{0};
  std::vector<int> col_idx_;
  std::vector<double> vals_;
};

/// Exact sparse matrix-vector product; throws on dimension mismatch.
std::vector<double> spmv(const SparseMatrix& m, const std::vector<double>& x);

}  // namespace evqp
