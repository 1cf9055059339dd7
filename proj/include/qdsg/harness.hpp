#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qdsg/engine.hpp"
#include "qdsg/problems.hpp"

namespace qdsg {

enum class StopRule { none, relative_gap };

struct ExperimentConfig {
  int n = 100;
  int d = 10;
  double radius = 0.4;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::quadratic;
  double lambda = 0.0;
  Algorithm algorithm = Algorithm::qdsg;
  int bits = 8;
  ScheduleKind schedule = ScheduleKind::inv_sqrt;
  double scale_a = 1.0;
  AverageMode averaging = AverageMode::weighted;
  long rounds = 5000;
  long log_every = 1;
  StopRule stop = StopRule::none;
  double stop_tau = 0.05;
  int tracked_node = 0;
  double ref_tol = 1e-9;
  std::string out_dir;  // empty: keep the run in memory, write nothing
  bool export_graph = false;
  bool export_dataset = false;
  bool export_messages = false;
};

void validate(const ExperimentConfig& cfg);

/// Sub-seeds derived from the config seed; one seed fixes the graph, the
/// dataset, and the shared start point together.
std::uint64_t dataset_seed(std::uint64_t config_seed);
std::uint64_t engine_seed(std::uint64_t config_seed);

/// JSON round trip; unknown keys and malformed values raise ParseError,
/// out-of-range values raise ValidationError naming the field. Fields absent
/// from the file keep their defaults.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);

/// Per-round series (sampled every log_every rounds, plus rounds 0 and K)
/// and run-level summary.
struct RunRecord {
  std::vector<long> round;
  std::vector<double> alpha;
  std::vector<double> gap_tracked;  // f(z_tracked) - f*
  std::vector<double> gap_max;      // max_i f(z_i) - f*
  std::vector<double> dist_star_sq; // ||z_tracked - x*||^2
  std::vector<double> consensus_fro;
  std::vector<double> max_node_dev;
  std::vector<double> max_delta;
  std::vector<double> delta_bound;
  std::vector<double> consensus_bound;
  std::vector<long> containment_violations;
  std::vector<long> delta_violations;
  std::vector<long> consensus_violations;
  std::vector<long> out_of_range_total;
  std::vector<std::uint64_t> bits_transmitted;

  double gamma = 0.0;
  double sigma2 = 0.0;
  double lipschitz_total = 0.0;
  double f_star = 0.0;
  Vec x_star;
  bool assumption2 = false;
  long rounds_executed = 0;
  long stop_round = -1;  // round where the stop rule fired, -1 otherwise
  double max_compensation_residual = 0.0;
  long first_round_sigma_exceeds_alpha = -1;
  MonitorCounters final_violations;
  std::uint64_t total_bits = 0;

  std::size_t samples() const { return round.size(); }
};

/// Runs one experiment end to end: graph, dataset, mixing matrix, reference
/// solution, then `rounds` engine rounds (or until the stop rule fires).
/// When cfg.out_dir is set, writes metrics.csv and metadata.json there (plus
/// optional graph/dataset/message exports). Fully deterministic per config.
RunRecord run_experiment(const ExperimentConfig& cfg);

struct SweepEntry {
  int bits = 0;
  long iterations = -1;  // rounds to reach the target, -1 if not reached
  bool target_reached = false;
  double final_gap = 0.0;
  long containment_violations = 0;
  std::uint64_t bits_transmitted = 0;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
};

/// Reruns the base config for each bit width, sharing graph, dataset and
/// reference solution, and records the rounds needed to reach the relative
/// gap target. Writes sweep.csv when out_dir is set.
SweepResult sweep_bits(const ExperimentConfig& base, const std::vector<int>& b_list);

/// One CSV per labeled record: round, gap, consensus error, quantization
/// error and its bound.
void emit_plot_data(const std::vector<std::pair<std::string, const RunRecord*>>& records,
                    const std::string& dir);

void write_metrics_csv(const RunRecord& rec, const std::string& path);

}  // namespace qdsg
