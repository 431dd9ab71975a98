#include "evqp/fxp.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

namespace evqp {

void check_format(const FxpFormat& fmt) {
  if (fmt.total_bits < 2 || fmt.total_bits > 32)
    throw std::invalid_argument("FxpFormat: total_bits must be in [2, 32]");
  if (fmt.frac_bits < 0 || fmt.frac_bits >= fmt.total_bits)
    throw std::invalid_argument(
        "FxpFormat: frac_bits must be in [0, total_bits)");
}

double FxpFormat::from_raw(std::int64_t raw) const {
  return std::ldexp(static_cast<double>(raw), -frac_bits);
}

std::string FxpFormat::to_string() const {
  return "Q" + std::to_string(total_bits - frac_bits - 1) + "." +
         std::to_string(frac_bits);
}

FxpFormat FxpFormat::parse(const std::string& text) {
  if (text.size() < 4 || text[0] != 'Q')
    throw std::invalid_argument("FxpFormat: expected \"Q<int>.<frac>\", got \"" +
                                text + "\"");
  const std::size_t dot = text.find('.');
  if (dot == std::string::npos)
    throw std::invalid_argument("FxpFormat: expected \"Q<int>.<frac>\", got \"" +
                                text + "\"");
  const std::string int_part = text.substr(1, dot - 1);
  const std::string frac_part = text.substr(dot + 1);
  const auto all_digits = [](const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
  };
  int int_bits = 0, frac_bits = 0;
  try {
    if (!all_digits(int_part) || !all_digits(frac_part))
      throw std::invalid_argument("non-digit characters");
    int_bits = std::stoi(int_part);
    frac_bits = std::stoi(frac_part);
  } catch (const std::exception&) {
    throw std::invalid_argument("FxpFormat: expected \"Q<int>.<frac>\", got \"" +
                                text + "\"");
  }
  FxpFormat fmt{int_bits + frac_bits + 1, frac_bits};
  check_format(fmt);
  return fmt;
}

std::vector<double> FxpTensor::dequantize() const {
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = fmt.from_raw(raw[i]);
  return out;
}

std::vector<std::int64_t> QuantizedMatrix::row_nnz_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n_rows), 0);
  for (int r : row_idx) ++counts[static_cast<std::size_t>(r)];
  return counts;
}

SparseMatrix QuantizedMatrix::dequantize() const {
  std::vector<Triplet> t;
  t.reserve(raw.size());
  for (int c = 0; c < n_cols; ++c)
    for (std::int64_t i = col_ptr[c]; i < col_ptr[c + 1]; ++i)
      t.push_back({row_idx[i], c,
                   std::ldexp(static_cast<double>(raw[i]), scale_exp)});
  return SparseMatrix::from_triplets(n_rows, n_cols, std::move(t));
}

std::int64_t saturate(std::int64_t v, const FxpFormat& fmt,
                      std::int64_t* saturations) {
  if (v > fmt.raw_max()) {
    if (saturations) ++*saturations;
    return fmt.raw_max();
  }
  if (v < fmt.raw_min()) {
    if (saturations) ++*saturations;
    return fmt.raw_min();
  }
  return v;
}

namespace {

std::int64_t quantize_value(double x, const FxpFormat& fmt,
                            std::int64_t* saturations) {
  const double scaled = std::ldexp(x, fmt.frac_bits);
  const double r = std::nearbyint(scaled);  // ties to even
  if (std::isnan(r)) {
    if (saturations) ++*saturations;
    return 0;
  }
  if (r > static_cast<double>(fmt.raw_max())) {
    if (saturations) ++*saturations;
    return fmt.raw_max();
  }
  if (r < static_cast<double>(fmt.raw_min())) {
    if (saturations) ++*saturations;
    return fmt.raw_min();
  }
  return static_cast<std::int64_t>(r);
}

}  // namespace

FxpTensor quantize_vector(const std::vector<double>& x, const FxpFormat& fmt,
                          std::int64_t* saturations) {
  check_format(fmt);
  FxpTensor t;
  t.fmt = fmt;
  t.raw.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    t.raw[i] = quantize_value(x[i], fmt, saturations);
  return t;
}

QuantizedMatrix quantize_matrix(const SparseMatrix& m, int weight_bits) {
  if (weight_bits < 2 || weight_bits > 32)
    throw std::invalid_argument("quantize_matrix: weight_bits must be in [2, 32]");
  QuantizedMatrix q;
  q.n_rows = m.n_rows();
  q.n_cols = m.n_cols();
  q.weight_bits = weight_bits;
  q.col_ptr.assign(static_cast<std::size_t>(m.n_cols()) + 1, 0);

  double amax = 0.0;
  for (double v : m.values()) amax = std::max(amax, std::abs(v));
  if (amax == 0.0) return q;

  const double lim =
      static_cast<double>((std::int64_t{1} << (weight_bits - 1)) - 1);
  int e = static_cast<int>(std::ceil(std::log2(amax / lim)));
  while (std::ldexp(amax, -e) > lim) ++e;
  while (std::ldexp(amax, -(e - 1)) <= lim) --e;
  q.scale_exp = e;

  // Quantize entries, dropping those that round to zero; gather per column.
  std::vector<std::int64_t> counts(static_cast<std::size_t>(m.n_cols()), 0);
  std::vector<Triplet> kept;
  kept.reserve(static_cast<std::size_t>(m.nnz()));
  for (const Triplet& t : m.to_triplets()) {
    const double r = std::nearbyint(std::ldexp(t.value, -e));
    if (r == 0.0) continue;
    kept.push_back({t.row, t.col, r});
    ++counts[static_cast<std::size_t>(t.col)];
  }
  for (int c = 0; c < m.n_cols(); ++c)
    q.col_ptr[static_cast<std::size_t>(c) + 1] =
        q.col_ptr[static_cast<std::size_t>(c)] + counts[static_cast<std::size_t>(c)];
  q.row_idx.resize(kept.size());
  q.raw.resize(kept.size());
  std::vector<std::int64_t> cursor(q.col_ptr.begin(), q.col_ptr.end() - 1);
  for (const Triplet& t : kept) {
    const std::int64_t at = cursor[static_cast<std::size_t>(t.col)]++;
    q.row_idx[static_cast<std::size_t>(at)] = t.row;
    q.raw[static_cast<std::size_t>(at)] = static_cast<std::int32_t>(t.value);
  }
  return q;
}

__int128 round_half_even_rshift(__int128 v, int shift) {
  if (shift <= 0) return v;
  if (shift > 126)
    throw std::invalid_argument("round_half_even_rshift: shift too large");
  const __int128 q = v >> shift;
  const __int128 r = v - (q << shift);
  const __int128 half = static_cast<__int128>(1) << (shift - 1);
  if (r > half) return q + 1;
  if (r == half) return q + (q & 1);
  return q;
}

FxpTensor fxp_spmv(const QuantizedMatrix& m, const FxpTensor& x,
                   const FxpFormat& out_fmt, std::int64_t threshold,
                   std::int64_t* mac_ops, std::int64_t* saturations) {
  check_format(out_fmt);
  if (static_cast<int>(x.size()) != m.n_cols)
    throw std::invalid_argument("fxp_spmv: dimension mismatch");

  std::vector<__int128> acc(static_cast<std::size_t>(m.n_rows), 0);
  for (int c = 0; c < m.n_cols; ++c) {
    const std::int64_t xi = x.raw[static_cast<std::size_t>(c)];
    if (xi <= threshold && -xi <= threshold) continue;
    for (std::int64_t i = m.col_ptr[c]; i < m.col_ptr[c + 1]; ++i) {
      acc[static_cast<std::size_t>(m.row_idx[i])] +=
          static_cast<__int128>(m.raw[static_cast<std::size_t>(i)]) * xi;
      if (mac_ops) ++*mac_ops;
    }
  }

  FxpTensor out;
  out.fmt = out_fmt;
  out.raw.resize(static_cast<std::size_t>(m.n_rows));
  const int shift = m.scale_exp - x.fmt.frac_bits + out_fmt.frac_bits;
  for (std::size_t r = 0; r < out.raw.size(); ++r) {
    __int128 v = acc[r];
    if (shift >= 0) {
      // |acc| < 2^95 for any in-range inputs, so a guarded left shift
      // cannot wrap.
      const __int128 lim = static_cast<__int128>(1) << 100;
      if (v > (lim >> shift) || v < -(lim >> shift)) {
        out.raw[r] = v > 0 ? out_fmt.raw_max() : out_fmt.raw_min();
        if (saturations) ++*saturations;
        continue;
      }
      v <<= shift;
    } else {
      v = round_half_even_rshift(v, -shift);
    }
    if (v > static_cast<__int128>(out_fmt.raw_max())) {
      out.raw[r] = out_fmt.raw_max();
      if (saturations) ++*saturations;
    } else if (v < static_cast<__int128>(out_fmt.raw_min())) {
      out.raw[r] = out_fmt.raw_min();
      if (saturations) ++*saturations;
    } else {
      out.raw[r] = static_cast<std::int64_t>(v);
    }
  }
  return out;
}

std::int64_t shift_halve_raw(std::int64_t raw) { return raw >> 1; }

std::int64_t shift_double_raw(std::int64_t raw, const FxpFormat& fmt,
                              std::int64_t* saturations) {
  return saturate(raw * 2, fmt, saturations);
}

void shift_halve(FxpTensor& t) {
  for (std::int64_t& r : t.raw) r = shift_halve_raw(r);
}

void shift_double(FxpTensor& t, std::int64_t* saturations) {
  for (std::int64_t& r : t.raw) r = shift_double_raw(r, t.fmt, saturations);
}

}  // namespace evqp
