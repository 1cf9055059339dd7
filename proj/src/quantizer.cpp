#include "qdsg/quantizer.hpp"

#include <cmath>
#include <cstring>

#include "qdsg/errors.hpp"

namespace qdsg {

bool QuantGrid::contains(const Vec& x) const {
  for (int c = 0; c < dim(); ++c)
    if (x[c] < lower[c] || x[c] > upper[c]) return false;
  return true;
}

QuantGrid box_grid(Vec lower, Vec upper, int bits) {
  if (bits < 1 || bits > 52) throw ValidationError("bits", "must be in [1, 52]");
  if (lower.size() != upper.size()) throw ValidationError("bounds", "dimension mismatch");
  for (std::size_t c = 0; c < lower.size(); ++c)
    if (!(upper[c] >= lower[c])) throw ValidationError("bounds", "upper < lower");
  return QuantGrid{std::move(lower), std::move(upper), bits};
}

QuantGrid adaptive_interval(const Vec& q_prev, double gamma, double alpha_prev, int bits) {
  if (bits < 1 || bits > 52) throw ValidationError("bits", "must be in [1, 52]");
  if (gamma < 0.0 || alpha_prev < 0.0)
    throw ValidationError("interval", "gamma and alpha must be nonnegative");
  const double half = 0.5 * gamma * alpha_prev;
  QuantGrid g;
  g.bits = bits;
  g.lower.resize(q_prev.size());
  g.upper.resize(q_prev.size());
  for (std::size_t c = 0; c < q_prev.size(); ++c) {
    g.lower[c] = q_prev[c] - half;
    g.upper[c] = q_prev[c] + half;
  }
  return g;
}

CodeWord quantize(const Vec& x, const QuantGrid& grid) {
  CodeWord cw;
  cw.indices.resize(x.size());
  const std::int64_t points = grid.points();
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double lo = grid.lower[c];
    const double hi = grid.upper[c];
    const double step = grid_detail::step_size(lo, hi, points);
    cw.indices[c] = grid_detail::nearest_index(lo, hi, step, points, x[c]);
  }
  return cw;
}

void dequantize_into(const std::vector<std::uint64_t>& indices, const QuantGrid& grid, Vec& out) {
  const std::int64_t points = grid.points();
  out.resize(indices.size());
  for (std::size_t c = 0; c < indices.size(); ++c) {
    if (indices[c] >= static_cast<std::uint64_t>(points))
      throw IndexOutOfRange("codeword index exceeds grid size");
    const double lo = grid.lower[c];
    const double hi = grid.upper[c];
    const double step = grid_detail::step_size(lo, hi, points);
    out[c] = grid_detail::point_at(lo, hi, step, points, indices[c]);
  }
}

Vec dequantize(const CodeWord& cw, const QuantGrid& grid) {
  Vec out;
  dequantize_into(cw.indices, grid, out);
  return out;
}

std::vector<std::uint8_t> pack(const std::vector<std::uint64_t>& indices, int bits) {
  if (bits < 1 || bits > 52) throw ValidationError("bits", "must be in [1, 52]");
  const std::uint64_t limit = std::uint64_t{1} << bits;
  const std::size_t nbits = indices.size() * static_cast<std::size_t>(bits);
  std::vector<std::uint8_t> out((nbits + 7) / 8, 0);
  std::size_t pos = 0;
  for (std::uint64_t v : indices) {
    if (v >= limit) throw IndexOutOfRange("index does not fit in the field width");
    for (int k = bits - 1; k >= 0; --k) {
      const std::uint8_t bit = static_cast<std::uint8_t>((v >> k) & 1u);
      out[pos >> 3] |= static_cast<std::uint8_t>(bit << (7 - (pos & 7)));
      ++pos;
    }
  }
  return out;
}

namespace {

// Reads `bits` bits starting at bit position `pos` from an MSB-first stream.
// bits <= 52 and offset <= 7, so the field always fits an 8-byte window.
inline std::uint64_t extract_bits(const std::uint8_t* data, std::size_t size, std::size_t pos,
                                  int bits) {
  const std::size_t first = pos >> 3;
  const int offset = static_cast<int>(pos & 7);
  const int need = offset + bits;
  const int nbytes = (need + 7) / 8;
  std::uint64_t w = 0;
  for (int k = 0; k < nbytes; ++k) {
    const std::size_t idx = first + static_cast<std::size_t>(k);
    w = (w << 8) | (idx < size ? data[idx] : 0u);
  }
  const int shift = nbytes * 8 - need;
  return (w >> shift) & ((std::uint64_t{1} << bits) - 1);
}

}  // namespace

void unpack_into(const std::vector<std::uint8_t>& bytes, int bits, int dim,
                 std::vector<std::uint64_t>& out) {
  if (bits < 1 || bits > 52) throw ValidationError("bits", "must be in [1, 52]");
  const std::size_t nbits = static_cast<std::size_t>(bits) * dim;
  if (bytes.size() != (nbits + 7) / 8)
    throw LengthMismatch("packed payload has wrong byte count");
  out.resize(dim);
  std::size_t pos = 0;
  for (int c = 0; c < dim; ++c, pos += bits)
    out[c] = extract_bits(bytes.data(), bytes.size(), pos, bits);
}

std::vector<std::uint64_t> unpack(const std::vector<std::uint8_t>& bytes, int bits, int dim) {
  std::vector<std::uint64_t> out;
  unpack_into(bytes, bits, dim, out);
  return out;
}

double compute_gamma(double lipschitz_total, double sigma2) {
  if (lipschitz_total < 0.0) throw ValidationError("L", "must be nonnegative");
  if (sigma2 < 0.0) throw ValidationError("sigma2", "must be nonnegative");
  if (sigma2 >= 1.0) throw DegenerateSpectrum("sigma2 >= 1, spectral gap is empty");
  return 48.0 * (2.0 + lipschitz_total) / (1.0 - sigma2);
}

bool check_bandwidth(int n, int d, double gamma, int bits) {
  const double capacity = std::ldexp(1.0, bits) - 1.0;
  return std::sqrt(static_cast<double>(n) * static_cast<double>(d)) * gamma <= capacity;
}

QuantParams make_quant_params(int n, int d, double lipschitz_total, double sigma2, int bits) {
  QuantParams p;
  p.gamma = compute_gamma(lipschitz_total, sigma2);
  p.bits = bits;
  p.assumption2_satisfied = check_bandwidth(n, d, p.gamma, bits);
  return p;
}

namespace {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<std::uint8_t> encode_message(const Message& m) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + m.payload.size());
  put_u32(out, m.node);
  put_u32(out, m.round);
  out.insert(out.end(), m.payload.begin(), m.payload.end());
  return out;
}

Message decode_message(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8) throw LengthMismatch("message shorter than its header");
  Message m;
  m.node = get_u32(bytes.data());
  m.round = get_u32(bytes.data() + 4);
  m.payload.assign(bytes.begin() + 8, bytes.end());
  return m;
}

}  // namespace qdsg
