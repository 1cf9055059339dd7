#include "qdsg/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "qdsg/errors.hpp"
#include "qdsg/rng.hpp"

namespace qdsg {

double StepSchedule::at(long k) const {
  if (kind == ScheduleKind::inv_sqrt) return 1.0 / std::sqrt(static_cast<double>(k + 1));
  return scale / static_cast<double>(k + 1);
}

namespace {

void write_u32_le(std::ofstream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {static_cast<std::uint8_t>(v & 0xff),
                             static_cast<std::uint8_t>((v >> 8) & 0xff),
                             static_cast<std::uint8_t>((v >> 16) & 0xff),
                             static_cast<std::uint8_t>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

struct Engine::Impl {
  Graph graph;
  MixingMatrix mixing;
  std::vector<Objective> objs;
  Box box;
  EngineConfig cfg;

  int n = 0;
  int d = 0;
  double lipschitz_total = 0.0;
  double gamma = 0.0;
  bool assumption2 = false;
  std::int64_t points = 2;
  double capacity = 1.0;  // 2^bits - 1

  long k = 0;  // completed rounds

  std::vector<Vec> x;
  std::vector<Vec> q;
  std::vector<std::vector<std::uint64_t>> idx;  // codeword of q_i(k)
  // receiver-side memory of the last decoded neighbor value, adjacency order
  std::vector<std::vector<Vec>> recv_q;
  std::vector<std::vector<double>> w_adj;
  QuantGrid boxgrid;
  double prev_alpha = 0.0;

  std::vector<Vec> z_num;
  double z_den = 0.0;

  MonitorCounters counters;
  std::vector<long> oor;
  double envelope = 0.0;  // S(k)
  double comp_residual_max = 0.0;
  double sigma_pow = 1.0;
  long first_sigma_exceeds = -1;
  std::uint64_t bits_sent = 0;

  std::ofstream msg_log;
  bool log_enabled = false;

  // round scratch
  std::vector<Vec> new_x, new_q;
  std::vector<std::vector<std::uint64_t>> new_idx;
  std::vector<std::vector<std::uint8_t>> payloads;
  std::vector<std::uint64_t> idx_scratch;
  Vec g_scratch, sum_v, sum_g, sum_x;

  void validate() const;
  void init_state();
  void step();
  double consensus_error() const;
  Vec mean() const;
  double delta_bound_rhs() const {
    return std::sqrt(static_cast<double>(d)) * gamma * cfg.schedule.at(k) / capacity;
  }
};

void Engine::Impl::validate() const {
  const int nn = graph.n;
  if (mixing.n != nn) throw ConfigMismatch("mixing matrix size does not match the graph");
  if (static_cast<int>(objs.size()) != nn)
    throw ConfigMismatch("one objective per node is required");
  for (const auto& o : objs)
    if (static_cast<int>(o.a.size()) != box.dim())
      throw ConfigMismatch("objective dimension does not match the box");
  if (cfg.bits < 1 || cfg.bits > 52) throw ValidationError("bits", "must be in [1, 52]");
  if (!(cfg.schedule.at(0) > 0.0)) throw ValidationError("schedule", "alpha(0) must be > 0");
  if (mixing.sigma2 >= 1.0 - 1e-9)
    throw DegenerateSpectrum("sigma2 too close to 1; mixing matrix cannot contract");

  for (int i = 0; i < nn; ++i) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < nn; ++j) {
      row += mixing.at(i, j);
      col += mixing.at(j, i);
      if (i != j) {
        const bool edge = graph.has_edge(i, j);
        const bool nonzero = mixing.at(i, j) != 0.0;
        if (edge != nonzero)
          throw ConfigMismatch("mixing sparsity pattern does not match the graph");
      }
    }
    if (std::fabs(row - 1.0) > 1e-12 || std::fabs(col - 1.0) > 1e-12)
      throw ConfigMismatch("mixing matrix is not doubly stochastic");
  }
}

void Engine::Impl::init_state() {
  n = graph.n;
  d = box.dim();
  for (const auto& o : objs) lipschitz_total += o.lipschitz;
  gamma = compute_gamma(lipschitz_total, mixing.sigma2);
  assumption2 = check_bandwidth(n, d, gamma, cfg.bits);
  points = std::int64_t{1} << cfg.bits;
  capacity = std::ldexp(1.0, cfg.bits) - 1.0;
  boxgrid = box_grid(box.lower, box.upper, cfg.bits);

  // Every node starts at the same grid point of the box grid. The index is
  // the top `bits` bits of one uniform word per coordinate, so one seed
  // yields nested start points across bit widths: sweeps over b compare
  // runs launched from nearly the same point.
  Rng rng(cfg.seed);
  std::vector<std::uint64_t> start(d);
  for (int c = 0; c < d; ++c) start[c] = rng.next() >> (64 - cfg.bits);
  Vec x0;
  dequantize_into(start, boxgrid, x0);

  x.assign(n, x0);
  q.assign(n, x0);
  idx.assign(n, start);
  w_adj.resize(n);
  recv_q.resize(n);
  for (int i = 0; i < n; ++i) {
    w_adj[i].reserve(graph.adjacency[i].size());
    for (int j : graph.adjacency[i]) w_adj[i].push_back(mixing.at(i, j));
    if (cfg.algorithm == Algorithm::qdsg)
      recv_q[i].assign(graph.adjacency[i].size(), Vec(d, 0.0));
  }

  const double w0 = cfg.averaging == AverageMode::weighted ? cfg.schedule.at(0) : 1.0;
  z_num.assign(n, Vec(d));
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) z_num[i][c] = w0 * x0[c];
  z_den = w0;

  oor.assign(n, 0);
  if (sigma_pow > cfg.schedule.at(0)) first_sigma_exceeds = 0;

  new_x.assign(n, Vec(d));
  new_q.assign(n, Vec(d));
  new_idx.assign(n, std::vector<std::uint64_t>(d));
  payloads.resize(n);
  g_scratch.resize(d);
  sum_v.resize(d);
  sum_g.resize(d);
  sum_x.resize(d);
}

void Engine::Impl::step() {
  const bool quantized = cfg.algorithm == Algorithm::qdsg;
  const double a_k = cfg.schedule.at(k);
  const double sigma2 = mixing.sigma2;

  double delta_fro_sq = 0.0;
  if (quantized)
    for (int i = 0; i < n; ++i) delta_fro_sq += dist_sq(x[i], q[i]);
  const double delta_fro = std::sqrt(delta_fro_sq);

  if (quantized) {
    // materialize and deliver this round's codewords
    for (int j = 0; j < n; ++j) {
      payloads[j] = pack(idx[j], cfg.bits);
      if (log_enabled) {
        Message m{static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(k), payloads[j]};
        const auto bytes = encode_message(m);
        write_u32_le(msg_log, static_cast<std::uint32_t>(bytes.size()));
        msg_log.write(reinterpret_cast<const char*>(bytes.data()),
                      static_cast<std::streamsize>(bytes.size()));
      }
    }
    if (log_enabled) msg_log.flush();
    const double half = 0.5 * gamma * prev_alpha;
    for (int i = 0; i < n; ++i) {
      const auto& nb = graph.adjacency[i];
      for (std::size_t s = 0; s < nb.size(); ++s) {
        const int j = nb[s];
        unpack_into(payloads[j], cfg.bits, d, idx_scratch);
        Vec& slot = recv_q[i][s];
        for (int c = 0; c < d; ++c) {
          double lo, hi;
          if (k == 0) {
            lo = boxgrid.lower[c];
            hi = boxgrid.upper[c];
          } else {
            lo = slot[c] - half;
            hi = slot[c] + half;
          }
          const double step_c = grid_detail::step_size(lo, hi, points);
          slot[c] = grid_detail::point_at(lo, hi, step_c, points, idx_scratch[c]);
        }
        // receiver reconstruction must equal the sender's value exactly
        if (std::memcmp(slot.data(), q[j].data(), sizeof(double) * d) != 0)
          throw NumericalFailure("decode symmetry broken between sender and receiver");
        bits_sent += static_cast<std::uint64_t>(cfg.bits) * d;
      }
    }
  } else {
    // unquantized baseline ships raw coordinates (64 bits each)
    for (int i = 0; i < n; ++i)
      bits_sent += static_cast<std::uint64_t>(graph.degree(i)) * 64u * d;
  }

  std::fill(sum_v.begin(), sum_v.end(), 0.0);
  std::fill(sum_g.begin(), sum_g.end(), 0.0);
  std::fill(sum_x.begin(), sum_x.end(), 0.0);

  for (int i = 0; i < n; ++i) {
    subgrad_into(objs[i], x[i], g_scratch);
    Vec& v = new_x[i];
    v = x[i];
    const auto& nb = graph.adjacency[i];
    if (quantized) {
      const Vec& qi = q[i];
      for (std::size_t s = 0; s < nb.size(); ++s) {
        const double w = w_adj[i][s];
        const Vec& qj = recv_q[i][s];
        for (int c = 0; c < d; ++c) v[c] += w * (qj[c] - qi[c]);
      }
    } else {
      const Vec& xi = x[i];
      for (std::size_t s = 0; s < nb.size(); ++s) {
        const double w = w_adj[i][s];
        const Vec& xj = x[nb[s]];
        for (int c = 0; c < d; ++c) v[c] += w * (xj[c] - xi[c]);
      }
    }
    for (int c = 0; c < d; ++c) v[c] -= a_k * g_scratch[c];
    for (int c = 0; c < d; ++c) {
      sum_v[c] += v[c];
      sum_g[c] += g_scratch[c];
      sum_x[c] += x[i][c];
    }
    project_box_into(box, v);
  }

  // vbar(k) = xbar(k) - (alpha/n) sum_i g_i, checked before projection
  double res = 0.0;
  for (int c = 0; c < d; ++c) {
    const double lhs = sum_v[c] / n;
    const double rhs = sum_x[c] / n - a_k / n * sum_g[c];
    res = std::max(res, std::fabs(lhs - rhs));
  }
  comp_residual_max = std::max(comp_residual_max, res);

  if (quantized) {
    const double half = 0.5 * gamma * a_k;
    for (int i = 0; i < n; ++i) {
      bool contained = true;
      const Vec& qi = q[i];
      const Vec& xi = new_x[i];
      for (int c = 0; c < d; ++c) {
        const double lo = qi[c] - half;
        const double hi = qi[c] + half;
        if (xi[c] < lo || xi[c] > hi) contained = false;
        const double step_c = grid_detail::step_size(lo, hi, points);
        const std::uint64_t jdx = grid_detail::nearest_index(lo, hi, step_c, points, xi[c]);
        new_idx[i][c] = jdx;
        new_q[i][c] = grid_detail::point_at(lo, hi, step_c, points, jdx);
      }
      if (!contained) {
        ++counters.containment;
        ++oor[i];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) new_q[i] = new_x[i];
  }

  x.swap(new_x);
  q.swap(new_q);
  idx.swap(new_idx);
  prev_alpha = a_k;
  ++k;

  const double wz = cfg.averaging == AverageMode::weighted ? cfg.schedule.at(k) : 1.0;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) z_num[i][c] += wz * x[i][c];
  z_den += wz;

  envelope = sigma2 * envelope + 6.0 * delta_fro + 3.0 * lipschitz_total * a_k;
  const double y = consensus_error();
  if (y > envelope * (1.0 + 1e-12) + 1e-12) ++counters.consensus_bound;

  if (quantized) {
    const double rhs = delta_bound_rhs() + 1e-12;
    for (int i = 0; i < n; ++i)
      if (dist(x[i], q[i]) > rhs) ++counters.delta_bound;
  }

  sigma_pow *= sigma2;
  if (first_sigma_exceeds < 0 && sigma_pow > cfg.schedule.at(k)) first_sigma_exceeds = k;
}

double Engine::Impl::consensus_error() const {
  Vec xbar = mean();
  double fro_sq = 0.0;
  for (int i = 0; i < n; ++i) fro_sq += dist_sq(x[i], xbar);
  return std::sqrt(fro_sq);
}

Vec Engine::Impl::mean() const {
  // accumulate offsets from node 0 so identical iterates average exactly
  Vec m(d, 0.0);
  for (int i = 1; i < n; ++i)
    for (int c = 0; c < d; ++c) m[c] += x[i][c] - x[0][c];
  for (int c = 0; c < d; ++c) m[c] = x[0][c] + m[c] / n;
  return m;
}

Engine::Engine(Graph graph, MixingMatrix mixing, std::vector<Objective> objectives, Box box,
               EngineConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  impl_->graph = std::move(graph);
  impl_->mixing = std::move(mixing);
  impl_->objs = std::move(objectives);
  impl_->box = std::move(box);
  impl_->cfg = cfg;
  impl_->validate();
  impl_->init_state();
}

Engine::~Engine() = default;
Engine::Engine(Engine&&) noexcept = default;
Engine& Engine::operator=(Engine&&) noexcept = default;

void Engine::step() { impl_->step(); }

long Engine::round() const { return impl_->k; }
int Engine::node_count() const { return impl_->n; }
int Engine::dim() const { return impl_->d; }

const Vec& Engine::iterate(int i) const { return impl_->x[i]; }
const Vec& Engine::quantized(int i) const { return impl_->q[i]; }

Vec Engine::output_average(int i) const {
  Vec z = impl_->z_num[i];
  for (double& v : z) v /= impl_->z_den;
  return z;
}

Vec Engine::mean_iterate() const { return impl_->mean(); }

double Engine::alpha(long k) const { return impl_->cfg.schedule.at(k); }
double Engine::gamma() const { return impl_->gamma; }
double Engine::sigma2() const { return impl_->mixing.sigma2; }
double Engine::lipschitz_total() const { return impl_->lipschitz_total; }
bool Engine::assumption2() const { return impl_->assumption2; }

double Engine::consensus_error() const { return impl_->consensus_error(); }

double Engine::max_node_deviation() const {
  const Vec xbar = impl_->mean();
  double m = 0.0;
  for (int i = 0; i < impl_->n; ++i) m = std::max(m, dist(impl_->x[i], xbar));
  return m;
}

double Engine::max_delta() const {
  double m = 0.0;
  for (int i = 0; i < impl_->n; ++i) m = std::max(m, dist(impl_->x[i], impl_->q[i]));
  return m;
}

double Engine::delta_bound_rhs() const { return impl_->delta_bound_rhs(); }
double Engine::consensus_bound() const { return impl_->envelope; }
const MonitorCounters& Engine::violations() const { return impl_->counters; }
long Engine::out_of_range_count(int i) const { return impl_->oor[i]; }

long Engine::out_of_range_total() const {
  long t = 0;
  for (long v : impl_->oor) t += v;
  return t;
}

double Engine::max_compensation_residual() const { return impl_->comp_residual_max; }
long Engine::first_round_sigma_exceeds_alpha() const { return impl_->first_sigma_exceeds; }
std::uint64_t Engine::bits_transmitted() const { return impl_->bits_sent; }

void Engine::enable_message_log(const std::string& path) {
  impl_->msg_log.open(path, std::ios::binary | std::ios::trunc);
  if (!impl_->msg_log) throw IoError("cannot open " + path);
  impl_->log_enabled = true;
}

std::vector<Message> read_message_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Message> messages;
  for (;;) {
    std::uint8_t lenb[4];
    in.read(reinterpret_cast<char*>(lenb), 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4) throw LengthMismatch("truncated message log record");
    const std::uint32_t len = static_cast<std::uint32_t>(lenb[0]) |
                              (static_cast<std::uint32_t>(lenb[1]) << 8) |
                              (static_cast<std::uint32_t>(lenb[2]) << 16) |
                              (static_cast<std::uint32_t>(lenb[3]) << 24);
    std::vector<std::uint8_t> bytes(len);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len))
      throw LengthMismatch("truncated message log record");
    messages.push_back(decode_message(bytes));
  }
  return messages;
}

}  // namespace qdsg
