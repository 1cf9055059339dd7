#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qdsg/problems.hpp"
#include "qdsg/quantizer.hpp"
#include "qdsg/topology.hpp"
#include "qdsg/vecmath.hpp"

namespace qdsg {

enum class Algorithm { qdsg, dsg };
enum class AverageMode { weighted, plain };
enum class ScheduleKind { inv_sqrt, inv_linear };

/// alpha(k) = 1/sqrt(k+1) or alpha(k) = scale/(k+1); positive and
/// nonincreasing in k.
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::inv_sqrt;
  double scale = 1.0;  // used by inv_linear only

  double at(long k) const;
};

struct MonitorCounters {
  long containment = 0;      // iterate left its quantization interval (pre-clamp)
  long delta_bound = 0;      // quantization error above sqrt(d) gamma alpha / (2^b - 1)
  long consensus_bound = 0;  // disagreement above the running envelope S(k)
};

struct EngineConfig {
  Algorithm algorithm = Algorithm::qdsg;
  AverageMode averaging = AverageMode::weighted;
  StepSchedule schedule;
  int bits = 8;
  std::uint64_t seed = 0;  // draws the shared initial grid point
};

/// Synchronous round loop. Every node starts from the same grid point of the
/// box grid; under `qdsg` all neighbor values cross the wire as packed
/// codewords and are reconstructed by the receiver from its own copy of the
/// sender's previous quantized value, never read from sender state.
///
/// The round-k update, applied to all nodes simultaneously:
///   v_i     = x_i + sum_j a_ij (q_j - q_i) - alpha(k) g_i(x_i)
///   x_i'    = clamp of v_i into the box
///   R_i'    = [q_i -+ (gamma/2) alpha(k)]
///   q_i'    = nearest grid point of R_i' to x_i'
/// The dsg variant averages exact iterates instead of quantized values and
/// carries no compensation term.
class Engine {
 public:
  Engine(Graph graph, MixingMatrix mixing, std::vector<Objective> objectives, Box box,
         EngineConfig cfg);
  ~Engine();
  Engine(Engine&&) noexcept;
  Engine& operator=(Engine&&) noexcept;

  void step();

  long round() const;  // completed rounds; state index k
  int node_count() const;
  int dim() const;

  const Vec& iterate(int i) const;    // x_i(k)
  const Vec& quantized(int i) const;  // q_i(k)
  Vec output_average(int i) const;    // z_i(k)
  Vec mean_iterate() const;           // xbar(k)

  double alpha(long k) const;
  double gamma() const;
  double sigma2() const;
  double lipschitz_total() const;
  bool assumption2() const;

  // monitor snapshot for the current state
  double consensus_error() const;      // ||X - 1 xbar^T||_F
  double max_node_deviation() const;   // max_i ||x_i - xbar||
  double max_delta() const;            // max_i ||x_i - q_i||
  double delta_bound_rhs() const;      // sqrt(d) gamma alpha(k) / (2^b - 1)
  double consensus_bound() const;      // S(k)
  const MonitorCounters& violations() const;
  long out_of_range_count(int i) const;
  long out_of_range_total() const;

  /// Largest per-coordinate residual of vbar = xbar - (alpha/n) sum g seen so
  /// far; the defining property of the compensation term.
  double max_compensation_residual() const;

  /// First round where sigma2^k exceeded alpha(k), or -1.
  long first_round_sigma_exceeds_alpha() const;

  std::uint64_t bits_transmitted() const;

  /// Streams every sent codeword to a binary log:
  /// u32 record length | u32 node | u32 round | packed payload.
  void enable_message_log(const std::string& path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<Message> read_message_log(const std::string& path);

}  // namespace qdsg
