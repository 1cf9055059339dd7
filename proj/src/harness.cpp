#include "qdsg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "qdsg/errors.hpp"
#include "qdsg/topology.hpp"

namespace qdsg {

namespace {

using json = nlohmann::ordered_json;

constexpr std::uint64_t kDatasetSeedSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kEngineSeedSalt = 0xd1b54a32d192ed03ull;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string loss_name(LossKind k) { return k == LossKind::quadratic ? "quadratic" : "absolute"; }
std::string algorithm_name(Algorithm a) { return a == Algorithm::qdsg ? "qdsg" : "dsg"; }
std::string schedule_name(ScheduleKind s) {
  return s == ScheduleKind::inv_sqrt ? "inv_sqrt" : "inv_linear";
}
std::string averaging_name(AverageMode m) {
  return m == AverageMode::weighted ? "weighted" : "plain";
}
std::string stop_name(StopRule s) { return s == StopRule::none ? "none" : "relative_gap"; }

template <typename T>
T parse_enum(const std::string& field, const std::string& value,
             std::initializer_list<std::pair<const char*, T>> table) {
  for (const auto& [name, v] : table)
    if (value == name) return v;
  throw ValidationError(field, "unknown value '" + value + "'");
}

}  // namespace

std::uint64_t dataset_seed(std::uint64_t config_seed) { return config_seed ^ kDatasetSeedSalt; }
std::uint64_t engine_seed(std::uint64_t config_seed) { return config_seed ^ kEngineSeedSalt; }

void validate(const ExperimentConfig& cfg) {
  if (cfg.n < 1) throw ValidationError("n", "must be >= 1");
  if (cfg.d < 1) throw ValidationError("d", "must be >= 1");
  if (!(cfg.radius > 0.0)) throw ValidationError("radius", "must be > 0");
  if (cfg.lambda < 0.0) throw ValidationError("lambda", "must be >= 0");
  if (cfg.bits < 1 || cfg.bits > 52) throw ValidationError("bits", "must be in [1, 52]");
  if (!(cfg.scale_a > 0.0)) throw ValidationError("scale_a", "must be > 0");
  if (cfg.rounds < 1) throw ValidationError("rounds", "must be >= 1");
  if (cfg.log_every < 1) throw ValidationError("log_every", "must be >= 1");
  if (cfg.stop == StopRule::relative_gap && !(cfg.stop_tau > 0.0))
    throw ValidationError("stop_tau", "must be > 0 when the stop rule is set");
  if (cfg.tracked_node < 0 || cfg.tracked_node >= cfg.n)
    throw ValidationError("tracked_node", "must be in [0, n)");
  if (!(cfg.ref_tol > 0.0)) throw ValidationError("ref_tol", "must be > 0");
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["n"] = cfg.n;
  j["d"] = cfg.d;
  j["radius"] = cfg.radius;
  j["seed"] = cfg.seed;
  j["loss"] = loss_name(cfg.loss);
  j["lambda"] = cfg.lambda;
  j["algorithm"] = algorithm_name(cfg.algorithm);
  j["bits"] = cfg.bits;
  j["schedule"] = schedule_name(cfg.schedule);
  j["scale_a"] = cfg.scale_a;
  j["averaging"] = averaging_name(cfg.averaging);
  j["rounds"] = cfg.rounds;
  j["log_every"] = cfg.log_every;
  j["stop"] = stop_name(cfg.stop);
  j["stop_tau"] = cfg.stop_tau;
  j["tracked_node"] = cfg.tracked_node;
  j["ref_tol"] = cfg.ref_tol;
  j["out_dir"] = cfg.out_dir;
  j["export_graph"] = cfg.export_graph;
  j["export_dataset"] = cfg.export_dataset;
  j["export_messages"] = cfg.export_messages;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("config root must be a JSON object");

  ExperimentConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "n") cfg.n = value.get<int>();
      else if (key == "d") cfg.d = value.get<int>();
      else if (key == "radius") cfg.radius = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "loss")
        cfg.loss = parse_enum<LossKind>("loss", value.get<std::string>(),
                                        {{"quadratic", LossKind::quadratic},
                                         {"absolute", LossKind::absolute}});
      else if (key == "lambda") cfg.lambda = value.get<double>();
      else if (key == "algorithm")
        cfg.algorithm = parse_enum<Algorithm>("algorithm", value.get<std::string>(),
                                              {{"qdsg", Algorithm::qdsg},
                                               {"dsg", Algorithm::dsg}});
      else if (key == "bits") cfg.bits = value.get<int>();
      else if (key == "schedule")
        cfg.schedule = parse_enum<ScheduleKind>("schedule", value.get<std::string>(),
                                                {{"inv_sqrt", ScheduleKind::inv_sqrt},
                                                 {"inv_linear", ScheduleKind::inv_linear}});
      else if (key == "scale_a") cfg.scale_a = value.get<double>();
      else if (key == "averaging")
        cfg.averaging = parse_enum<AverageMode>("averaging", value.get<std::string>(),
                                                {{"weighted", AverageMode::weighted},
                                                 {"plain", AverageMode::plain}});
      else if (key == "rounds") cfg.rounds = value.get<long>();
      else if (key == "log_every") cfg.log_every = value.get<long>();
      else if (key == "stop")
        cfg.stop = parse_enum<StopRule>("stop", value.get<std::string>(),
                                        {{"none", StopRule::none},
                                         {"relative_gap", StopRule::relative_gap}});
      else if (key == "stop_tau") cfg.stop_tau = value.get<double>();
      else if (key == "tracked_node") cfg.tracked_node = value.get<int>();
      else if (key == "ref_tol") cfg.ref_tol = value.get<double>();
      else if (key == "out_dir") cfg.out_dir = value.get<std::string>();
      else if (key == "export_graph") cfg.export_graph = value.get<bool>();
      else if (key == "export_dataset") cfg.export_dataset = value.get<bool>();
      else if (key == "export_messages") cfg.export_messages = value.get<bool>();
      else throw ParseError("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config value: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  out << config_to_json_text(cfg);
}

namespace {

struct Prepared {
  Graph graph;
  MixingMatrix mixing;
  Dataset dataset;
  std::vector<Objective> objectives;
  Box box;
  ReferenceSolution reference;
};

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared p;
  p.graph = generate_geometric_graph(cfg.n, cfg.radius, cfg.seed);
  p.mixing = lazy_metropolis(p.graph);
  p.dataset = generate_dataset(cfg.n, cfg.d, dataset_seed(cfg.seed));
  p.box = symmetric_unit_box(cfg.d);
  p.objectives = make_objectives(p.dataset, cfg.loss, cfg.lambda, p.box);
  p.reference = solve_reference(p.objectives, p.box, cfg.ref_tol);
  return p;
}

EngineConfig engine_config(const ExperimentConfig& cfg) {
  EngineConfig ec;
  ec.algorithm = cfg.algorithm;
  ec.averaging = cfg.averaging;
  ec.schedule.kind = cfg.schedule;
  ec.schedule.scale = cfg.scale_a;
  ec.bits = cfg.bits;
  ec.seed = engine_seed(cfg.seed);
  return ec;
}

void sample_round(const ExperimentConfig& cfg, const Prepared& p, const Engine& engine,
                  RunRecord& rec, double* gap_max_out) {
  const long k = engine.round();
  double gap_max = -1e300;
  for (int i = 0; i < cfg.n; ++i) {
    const double g = total_eval(p.objectives, engine.output_average(i)) - p.reference.f_star;
    gap_max = std::max(gap_max, g);
  }
  const Vec z = engine.output_average(cfg.tracked_node);
  rec.round.push_back(k);
  rec.alpha.push_back(engine.alpha(k));
  rec.gap_tracked.push_back(total_eval(p.objectives, z) - p.reference.f_star);
  rec.gap_max.push_back(gap_max);
  rec.dist_star_sq.push_back(dist_sq(z, p.reference.x_star));
  rec.consensus_fro.push_back(engine.consensus_error());
  rec.max_node_dev.push_back(engine.max_node_deviation());
  rec.max_delta.push_back(engine.max_delta());
  rec.delta_bound.push_back(engine.delta_bound_rhs());
  rec.consensus_bound.push_back(engine.consensus_bound());
  rec.containment_violations.push_back(engine.violations().containment);
  rec.delta_violations.push_back(engine.violations().delta_bound);
  rec.consensus_violations.push_back(engine.violations().consensus_bound);
  rec.out_of_range_total.push_back(engine.out_of_range_total());
  rec.bits_transmitted.push_back(engine.bits_transmitted());
  if (gap_max_out) *gap_max_out = gap_max;
}

RunRecord execute(const ExperimentConfig& cfg, const Prepared& p, Engine& engine) {
  RunRecord rec;
  rec.gamma = engine.gamma();
  rec.sigma2 = engine.sigma2();
  rec.lipschitz_total = engine.lipschitz_total();
  rec.f_star = p.reference.f_star;
  rec.x_star = p.reference.x_star;
  rec.assumption2 = engine.assumption2();

  const double f_star_abs = std::fabs(p.reference.f_star);
  const bool relative = f_star_abs >= 1e-12;

  double gap_max = 0.0;
  sample_round(cfg, p, engine, rec, &gap_max);
  for (long k = 1; k <= cfg.rounds; ++k) {
    engine.step();
    const bool logged = (k % cfg.log_every == 0) || k == cfg.rounds;
    if (!logged) continue;
    sample_round(cfg, p, engine, rec, &gap_max);
    if (cfg.stop == StopRule::relative_gap) {
      const double measure = relative ? gap_max / f_star_abs : gap_max;
      if (measure <= cfg.stop_tau) {
        rec.stop_round = k;
        break;
      }
    }
  }
  rec.rounds_executed = engine.round();
  rec.max_compensation_residual = engine.max_compensation_residual();
  rec.first_round_sigma_exceeds_alpha = engine.first_round_sigma_exceeds_alpha();
  rec.final_violations = engine.violations();
  rec.total_bits = engine.bits_transmitted();
  return rec;
}

json metadata_json(const ExperimentConfig& cfg, const Prepared& p, const RunRecord& rec) {
  json meta;
  meta["config"] = json::parse(config_to_json_text(cfg));
  json derived;
  derived["gamma"] = rec.gamma;
  derived["sigma2"] = rec.sigma2;
  derived["lipschitz_total"] = rec.lipschitz_total;
  derived["f_star"] = rec.f_star;
  derived["x_star"] = rec.x_star;
  derived["reference_tol"] = p.reference.tol;
  derived["assumption2_satisfied"] = rec.assumption2;
  derived["edges"] = p.graph.edge_count();
  derived["rounds_executed"] = rec.rounds_executed;
  derived["stop_round"] = rec.stop_round;
  derived["containment_violations"] = rec.final_violations.containment;
  derived["delta_violations"] = rec.final_violations.delta_bound;
  derived["consensus_violations"] = rec.final_violations.consensus_bound;
  derived["max_compensation_residual"] = rec.max_compensation_residual;
  derived["first_round_sigma_exceeds_alpha"] = rec.first_round_sigma_exceeds_alpha;
  derived["bits_transmitted"] = rec.total_bits;
  meta["derived"] = derived;
  return meta;
}

}  // namespace

void write_metrics_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: byte-identical output
  if (!out) throw IoError("cannot open " + path);
  out << "round,alpha,gap_tracked,gap_max,dist_star_sq,consensus_fro,max_node_dev,"
         "max_delta,delta_bound,consensus_bound,containment_violations,delta_violations,"
         "consensus_violations,out_of_range_total,bits_transmitted\n";
  for (std::size_t r = 0; r < rec.samples(); ++r) {
    out << rec.round[r] << ',' << fmt17(rec.alpha[r]) << ',' << fmt17(rec.gap_tracked[r]) << ','
        << fmt17(rec.gap_max[r]) << ',' << fmt17(rec.dist_star_sq[r]) << ','
        << fmt17(rec.consensus_fro[r]) << ',' << fmt17(rec.max_node_dev[r]) << ','
        << fmt17(rec.max_delta[r]) << ',' << fmt17(rec.delta_bound[r]) << ','
        << fmt17(rec.consensus_bound[r]) << ',' << rec.containment_violations[r] << ','
        << rec.delta_violations[r] << ',' << rec.consensus_violations[r] << ','
        << rec.out_of_range_total[r] << ',' << rec.bits_transmitted[r] << '\n';
  }
}

RunRecord run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  Prepared p = prepare(cfg);

  const bool write_files = !cfg.out_dir.empty();
  std::filesystem::path dir(cfg.out_dir);
  if (write_files) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir);
  }

  Engine engine(p.graph, p.mixing, p.objectives, p.box, engine_config(cfg));
  if (write_files && cfg.export_messages && cfg.algorithm == Algorithm::qdsg)
    engine.enable_message_log((dir / "messages.bin").string());

  RunRecord rec = execute(cfg, p, engine);

  if (write_files) {
    write_metrics_csv(rec, (dir / "metrics.csv").string());
    std::ofstream meta(dir / "metadata.json");
    if (!meta) throw IoError("cannot open metadata.json");
    meta << metadata_json(cfg, p, rec).dump(2) << "\n";
    if (cfg.export_graph)
      save_graph(p.graph, (dir / "graph.edges").string(), (dir / "graph.coords").string());
    if (cfg.export_dataset) save_dataset(p.dataset, (dir / "dataset.txt").string());
  }
  return rec;
}

SweepResult sweep_bits(const ExperimentConfig& base, const std::vector<int>& b_list) {
  ExperimentConfig cfg = base;
  cfg.stop = StopRule::relative_gap;
  if (!(cfg.stop_tau > 0.0)) cfg.stop_tau = 0.05;
  validate(cfg);

  SweepResult result;
  if (b_list.empty()) return result;

  Prepared p = prepare(cfg);
  for (int b : b_list) {
    ExperimentConfig run_cfg = cfg;
    run_cfg.bits = b;
    validate(run_cfg);
    Engine engine(p.graph, p.mixing, p.objectives, p.box, engine_config(run_cfg));
    RunRecord rec = execute(run_cfg, p, engine);
    SweepEntry e;
    e.bits = b;
    e.target_reached = rec.stop_round >= 0;
    e.iterations = rec.stop_round >= 0 ? rec.stop_round : -1;
    e.final_gap = rec.gap_max.back();
    e.containment_violations = rec.final_violations.containment;
    e.bits_transmitted = rec.total_bits;
    result.entries.push_back(e);
  }

  if (!cfg.out_dir.empty()) {
    std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir);
    std::ofstream out(dir / "sweep.csv", std::ios::binary);
    if (!out) throw IoError("cannot open sweep.csv");
    out << "bits,iterations,target_reached,final_gap,containment_violations,bits_transmitted\n";
    for (const auto& e : result.entries)
      out << e.bits << ',' << e.iterations << ',' << (e.target_reached ? 1 : 0) << ','
          << fmt17(e.final_gap) << ',' << e.containment_violations << ',' << e.bits_transmitted
          << '\n';
  }
  return result;
}

void emit_plot_data(const std::vector<std::pair<std::string, const RunRecord*>>& records,
                    const std::string& dir) {
  if (records.empty()) throw ValidationError("records", "need at least one record");
  std::filesystem::path base(dir);
  std::error_code ec;
  std::filesystem::create_directories(base, ec);
  if (ec) throw IoError("cannot create " + dir);
  for (const auto& [label, rec] : records) {
    std::ofstream out(base / ("curve_" + label + ".csv"), std::ios::binary);
    if (!out) throw IoError("cannot open curve file for " + label);
    out << "round,gap,consensus_error,delta,delta_bound\n";
    for (std::size_t r = 0; r < rec->samples(); ++r)
      out << rec->round[r] << ',' << fmt17(rec->gap_tracked[r]) << ','
          << fmt17(rec->consensus_fro[r]) << ',' << fmt17(rec->max_delta[r]) << ','
          << fmt17(rec->delta_bound[r]) << '\n';
  }
}

}  // namespace qdsg
