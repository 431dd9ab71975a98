#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evqp/sparse.hpp"

namespace evqp {

/// Signed fixed-point format: total_bits wide with frac_bits fraction
/// bits. Written as "Q<int>.<frac>" where int = total - frac - 1, e.g.
/// "Q17.6" for the default 24-bit state format.
struct FxpFormat {
  int total_bits = 24;
  int frac_bits = 6;

  std::int64_t raw_min() const { return -(std::int64_t{1} << (total_bits - 1)); }
  std::int64_t raw_max() const { return (std::int64_t{1} << (total_bits - 1)) - 1; }
  double from_raw(std::int64_t raw) const;
  std::string to_string() const;
  static FxpFormat parse(const std::string& text);

  bool operator==(const FxpFormat&) const = default;
};

/// Throws std::invalid_argument unless 2 <= total_bits <= 32 and
/// 0 <= frac_bits < total_bits.
void check_format(const FxpFormat& fmt);

/// Vector of raw fixed-point values sharing one format. Saturation is
/// enforced on every write path that produces these.
struct FxpTensor {
  std::vector<std::int64_t> raw;
  FxpFormat fmt;

  std::size_t size() const { return raw.size(); }
  double value(std::size_t i) const { return fmt.from_raw(raw[i]); }
  std::vector<double> dequantize() const;
};

/// Integer sparse matrix with a global power-of-two scale:
/// value = raw * 2^scale_exp. Stored column-compressed so that a message
/// from presynaptic unit i fans out over column i.
struct QuantizedMatrix {
  int n_rows = 0;
  int n_cols = 0;
  int weight_bits = 8;
  int scale_exp = 0;
  std::vector<std::int64_t> col_ptr{0};
  std::vector<int> row_idx;
  std::vector<std::int32_t> raw;

  std::int64_t nnz() const { return static_cast<std::int64_t>(raw.size()); }
  std::int64_t col_nnz(int c) const { return col_ptr[c + 1] - col_ptr[c]; }
  std::vector<std::int64_t> row_nnz_counts() const;
  SparseMatrix dequantize() const;
};

/// Saturates v into fmt's range; increments *saturations when clamped.
std::int64_t saturate(std::int64_t v, const FxpFormat& fmt,
                      std::int64_t* saturations);

/// Round-half-to-even quantization raw = round(x * 2^frac_bits), saturating.
FxpTensor quantize_vector(const std::vector<double>& x, const FxpFormat& fmt,
                          std::int64_t* saturations = nullptr);

/// Global power-of-two scale: the smallest exponent e such that
/// max|value| / 2^e <= 2^(weight_bits-1) - 1; entries that round to zero
/// are dropped from the pattern.
QuantizedMatrix quantize_matrix(const SparseMatrix& m, int weight_bits);

/// Event-driven sparse matrix-vector product. Inputs with |raw| <=
/// threshold are skipped (contribute zero, cost no work). Products are
/// accumulated exactly in wide integers; a single round-half-to-even
/// rescale produces the output format, saturating. mac_ops counts the
/// multiply-accumulates actually executed.
FxpTensor fxp_spmv(const QuantizedMatrix& m, const FxpTensor& x,
                   const FxpFormat& out_fmt, std::int64_t threshold = 0,
                   std::int64_t* mac_ops = nullptr,
                   std::int64_t* saturations = nullptr);

/// Arithmetic right shift by one (floors toward -inf); raw 1 -> 0.
std::int64_t shift_halve_raw(std::int64_t raw);

/// Left shift by one, saturating at the format bounds.
std::int64_t shift_double_raw(std::int64_t raw, const FxpFormat& fmt,
                              std::int64_t* saturations = nullptr);

void shift_halve(FxpTensor& t);
void shift_double(FxpTensor& t, std::int64_t* saturations = nullptr);

/// Round-half-to-even right shift of a wide accumulator; shift must be
/// in [0, 126].
__int128 round_half_even_rshift(__int128 v, int shift);

}  // namespace evqp
