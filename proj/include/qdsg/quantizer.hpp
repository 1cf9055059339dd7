#pragma once

#include <cstdint>
#include <vector>

#include "qdsg/vecmath.hpp"

namespace qdsg {

namespace grid_detail {

// Per-coordinate primitives shared by QuantGrid and the engine hot path.
// Every encoder/decoder must go through these so that sender and receiver
// reconstruct bit-identical values from the same (lo, hi, index) triple.

inline double step_size(double lo, double hi, std::int64_t points) {
  if (points <= 1 || !(hi > lo)) return 0.0;
  return (hi - lo) / static_cast<double>(points - 1);
}

/// Grid point j; the top index returns `hi` exactly so the endpoints are
/// reproduced bit-for-bit.
inline double point_at(double lo, double hi, double step, std::int64_t points, std::uint64_t j) {
  if (static_cast<std::int64_t>(j) >= points - 1) return (points <= 1 || !(hi > lo)) ? lo : hi;
  return lo + static_cast<double>(j) * step;
}

/// Index of the grid point nearest to x after clamping x into [lo, hi].
/// Exact midpoint ties resolve to the lower index.
inline std::uint64_t nearest_index(double lo, double hi, double step, std::int64_t points,
                                   double x) {
  if (points <= 1 || !(hi > lo)) return 0;
  const double xc = x < lo ? lo : (x > hi ? hi : x);
  double t = (xc - lo) / step;
  if (t < 0.0) t = 0.0;
  auto j = static_cast<std::int64_t>(t);
  if (j > points - 2) j = points - 2;
  const double tau_lo = point_at(lo, hi, step, points, static_cast<std::uint64_t>(j));
  const double tau_hi = point_at(lo, hi, step, points, static_cast<std::uint64_t>(j + 1));
  const double d_lo = xc - tau_lo;
  const double d_hi = tau_hi - xc;
  return static_cast<std::uint64_t>(d_lo <= d_hi ? j : j + 1);
}

}  // namespace grid_detail

/// Uniform per-coordinate grid of 2^bits points spanning [lower_c, upper_c].
/// A collapsed coordinate (upper == lower) degenerates to a single point.
struct QuantGrid {
  Vec lower;
  Vec upper;
  int bits = 1;

  int dim() const { return static_cast<int>(lower.size()); }
  std::int64_t points() const { return std::int64_t{1} << bits; }
  double resolution(int c) const {
    return grid_detail::step_size(lower[c], upper[c], points());
  }
  double point(int c, std::uint64_t index) const {
    return grid_detail::point_at(lower[c], upper[c], resolution(c), points(), index);
  }
  bool contains(const Vec& x) const;
};

/// Grid over a fixed rectangle (used for round 0 over the constraint box).
QuantGrid box_grid(Vec lower, Vec upper, int bits);

/// The recentered interval for the next round:
/// [q_prev - (gamma/2) alpha_prev, q_prev + (gamma/2) alpha_prev] per
/// coordinate, so the width is exactly gamma * alpha_prev.
QuantGrid adaptive_interval(const Vec& q_prev, double gamma, double alpha_prev, int bits);

/// Per-coordinate grid indices of one quantized vector; each index is in
/// [0, 2^bits - 1].
struct CodeWord {
  std::vector<std::uint64_t> indices;
};

/// Nearest grid point per coordinate, clamping out-of-interval inputs to the
/// interval first. Midpoint ties go to the lower index.
CodeWord quantize(const Vec& x, const QuantGrid& grid);

Vec dequantize(const CodeWord& cw, const QuantGrid& grid);
void dequantize_into(const std::vector<std::uint64_t>& indices, const QuantGrid& grid, Vec& out);

// Fixed-width bit packing: coordinate-major, most-significant-bit first
// within each coordinate, so the bit string is exactly bits*d long and is
// zero-padded to a byte boundary. pack throws IndexOutOfRange on an index
// >= 2^bits; unpack throws LengthMismatch when the byte count does not
// match ceil(bits*d / 8).
std::vector<std::uint8_t> pack(const std::vector<std::uint64_t>& indices, int bits);
std::vector<std::uint64_t> unpack(const std::vector<std::uint8_t>& bytes, int bits, int dim);
void unpack_into(const std::vector<std::uint8_t>& bytes, int bits, int dim,
                 std::vector<std::uint64_t>& out);

/// gamma = 48 (2 + L) / (1 - sigma2); throws DegenerateSpectrum when
/// sigma2 >= 1.
double compute_gamma(double lipschitz_total, double sigma2);

/// Bandwidth condition sqrt(n d) gamma <= 2^bits - 1. Reported, never
/// enforced; runs below the condition clamp and count.
bool check_bandwidth(int n, int d, double gamma, int bits);

struct QuantParams {
  double gamma = 0.0;
  int bits = 1;
  bool assumption2_satisfied = false;
};

QuantParams make_quant_params(int n, int d, double lipschitz_total, double sigma2, int bits);

// One wire message: 32-bit node id, 32-bit round index, then the packed
// payload (bits*d bits zero-padded to a byte boundary). All integers
// little-endian. The engine's message log prefixes each message with its
// 32-bit little-endian byte length.
struct Message {
  std::uint32_t node = 0;
  std::uint32_t round = 0;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> encode_message(const Message& m);
Message decode_message(const std::vector<std::uint8_t>& bytes);

}  // namespace qdsg
