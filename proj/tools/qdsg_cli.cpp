#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qdsg/errors.hpp"
#include "qdsg/harness.hpp"

namespace {

using qdsg::ExperimentConfig;

struct CliOptions {
  ExperimentConfig cfg;
  std::string loss = "quadratic";
  std::string algorithm = "qdsg";
  std::string schedule = "inv_sqrt";
  std::string averaging = "weighted";
  std::string stop = "none";
  std::string config_path;
};

void add_config_flags(CLI::App* cmd, CliOptions& o) {
  cmd->add_option("--n", o.cfg.n, "node count");
  cmd->add_option("--d", o.cfg.d, "problem dimension");
  cmd->add_option("--radius", o.cfg.radius, "geometric graph radius (2.0 gives a complete graph)");
  cmd->add_option("--seed", o.cfg.seed, "RNG seed shared by graph, dataset and start point");
  cmd->add_option("--loss", o.loss, "quadratic | absolute");
  cmd->add_option("--lambda", o.cfg.lambda, "l2 regularization per node");
  cmd->add_option("--algorithm", o.algorithm, "qdsg | dsg");
  cmd->add_option("--bits", o.cfg.bits, "codeword bits per coordinate [1, 52]");
  cmd->add_option("--schedule", o.schedule, "inv_sqrt | inv_linear");
  cmd->add_option("--scale-a", o.cfg.scale_a, "stepsize scale a for inv_linear");
  cmd->add_option("--averaging", o.averaging, "weighted | plain output average");
  cmd->add_option("--rounds", o.cfg.rounds, "rounds to run");
  cmd->add_option("--log-every", o.cfg.log_every, "metrics sampling period");
  cmd->add_option("--stop", o.stop, "none | relative_gap");
  cmd->add_option("--stop-tau", o.cfg.stop_tau, "relative gap target");
  cmd->add_option("--tracked-node", o.cfg.tracked_node, "node reported in gap_tracked");
  cmd->add_option("--ref-tol", o.cfg.ref_tol, "reference solver certificate tolerance");
  cmd->add_option("--out", o.cfg.out_dir, "output directory (default $QDSG_OUT or .)");
  cmd->add_flag("--export-graph", o.cfg.export_graph, "write graph.edges / graph.coords");
  cmd->add_flag("--export-dataset", o.cfg.export_dataset, "write dataset.txt");
  cmd->add_flag("--export-messages", o.cfg.export_messages, "write messages.bin");
  cmd->add_option("--config", o.config_path, "JSON config file; overrides all flags");
}

ExperimentConfig resolve(CliOptions& o) {
  o.cfg.loss = o.loss == "absolute" ? qdsg::LossKind::absolute : qdsg::LossKind::quadratic;
  if (o.loss != "absolute" && o.loss != "quadratic")
    throw qdsg::ValidationError("loss", "unknown value '" + o.loss + "'");
  o.cfg.algorithm = o.algorithm == "dsg" ? qdsg::Algorithm::dsg : qdsg::Algorithm::qdsg;
  if (o.algorithm != "dsg" && o.algorithm != "qdsg")
    throw qdsg::ValidationError("algorithm", "unknown value '" + o.algorithm + "'");
  o.cfg.schedule = o.schedule == "inv_linear" ? qdsg::ScheduleKind::inv_linear
                                              : qdsg::ScheduleKind::inv_sqrt;
  if (o.schedule != "inv_linear" && o.schedule != "inv_sqrt")
    throw qdsg::ValidationError("schedule", "unknown value '" + o.schedule + "'");
  o.cfg.averaging =
      o.averaging == "plain" ? qdsg::AverageMode::plain : qdsg::AverageMode::weighted;
  if (o.averaging != "plain" && o.averaging != "weighted")
    throw qdsg::ValidationError("averaging", "unknown value '" + o.averaging + "'");
  o.cfg.stop = o.stop == "relative_gap" ? qdsg::StopRule::relative_gap : qdsg::StopRule::none;
  if (o.stop != "relative_gap" && o.stop != "none")
    throw qdsg::ValidationError("stop", "unknown value '" + o.stop + "'");

  ExperimentConfig cfg = o.cfg;
  if (!o.config_path.empty()) cfg = qdsg::load_config(o.config_path);
  if (cfg.out_dir.empty()) {
    const char* env = std::getenv("QDSG_OUT");
    cfg.out_dir = env && *env ? env : ".";
  }
  qdsg::validate(cfg);
  return cfg;
}

void print_summary(const qdsg::RunRecord& rec) {
  std::printf("rounds executed        %ld\n", rec.rounds_executed);
  std::printf("sigma2                 %.6f\n", rec.sigma2);
  std::printf("gamma                  %.6f\n", rec.gamma);
  std::printf("L (total Lipschitz)    %.6f\n", rec.lipschitz_total);
  std::printf("f*                     %.12g\n", rec.f_star);
  std::printf("assumption2 satisfied  %s\n", rec.assumption2 ? "yes" : "no");
  std::printf("final gap (tracked)    %.12g\n", rec.gap_tracked.back());
  std::printf("final gap (max node)   %.12g\n", rec.gap_max.back());
  std::printf("containment violations %ld\n", rec.final_violations.containment);
  std::printf("delta-bound violations %ld\n", rec.final_violations.delta_bound);
  std::printf("consensus violations   %ld\n", rec.final_violations.consensus_bound);
  std::printf("bits transmitted       %llu\n",
              static_cast<unsigned long long>(rec.total_bits));
  if (rec.stop_round >= 0) std::printf("stop rule hit at round %ld\n", rec.stop_round);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic simulator for distributed subgradient descent "
               "under adaptive quantization"};
  app.require_subcommand(1);

  CliOptions run_opts, sweep_opts, ref_opts, check_opts;
  std::vector<int> bits_list{4, 5, 6, 7, 8, 10, 12};

  auto* run_cmd = app.add_subcommand("run", "run one experiment and write metrics");
  add_config_flags(run_cmd, run_opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "rerun over a list of bit widths");
  add_config_flags(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--bits-list", bits_list, "bit widths to sweep")->delimiter(',');
  auto* ref_cmd = app.add_subcommand("reference", "solve and cache the reference optimum");
  add_config_flags(ref_cmd, ref_opts);
  auto* check_cmd = app.add_subcommand("check", "run and fail on any invariant violation");
  add_config_flags(check_cmd, check_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      auto cfg = resolve(run_opts);
      auto rec = qdsg::run_experiment(cfg);
      print_summary(rec);
      std::printf("wrote %s/metrics.csv and metadata.json\n", cfg.out_dir.c_str());
      return 0;
    }
    if (sweep_cmd->parsed()) {
      auto cfg = resolve(sweep_opts);
      auto result = qdsg::sweep_bits(cfg, bits_list);
      std::printf("bits  iterations  reached  final_gap\n");
      for (const auto& e : result.entries)
        std::printf("%4d  %10ld  %7s  %.6g\n", e.bits, e.iterations,
                    e.target_reached ? "yes" : "no", e.final_gap);
      std::printf("wrote %s/sweep.csv\n", cfg.out_dir.c_str());
      return 0;
    }
    if (ref_cmd->parsed()) {
      auto cfg = resolve(ref_opts);
      auto data = qdsg::generate_dataset(cfg.n, cfg.d, qdsg::dataset_seed(cfg.seed));
      auto box = qdsg::symmetric_unit_box(cfg.d);
      auto objs = qdsg::make_objectives(data, cfg.loss, cfg.lambda, box);
      auto sol = qdsg::solve_reference(objs, box, cfg.ref_tol);
      std::filesystem::create_directories(cfg.out_dir);
      nlohmann::ordered_json j;
      j["f_star"] = sol.f_star;
      j["x_star"] = sol.x_star;
      j["certified_gap"] = sol.tol;
      std::ofstream out(std::filesystem::path(cfg.out_dir) / "reference.json");
      if (!out) throw qdsg::IoError("cannot open reference.json");
      out << j.dump(2) << "\n";
      std::printf("f* = %.17g (certified gap %.3g)\n", sol.f_star, sol.tol);
      return 0;
    }
    if (check_cmd->parsed()) {
      auto cfg = resolve(check_opts);
      auto rec = qdsg::run_experiment(cfg);
      print_summary(rec);
      const bool comp_ok = rec.max_compensation_residual <= 1e-10;
      std::printf("compensation residual  %.3g (%s)\n", rec.max_compensation_residual,
                  comp_ok ? "ok" : "VIOLATED");
      const long total = rec.final_violations.containment + rec.final_violations.delta_bound +
                         rec.final_violations.consensus_bound;
      if (total > 0 || !comp_ok) {
        std::fprintf(stderr, "invariant suite failed: %ld violations\n", total);
        return 3;
      }
      std::printf("invariant suite passed\n");
      return 0;
    }
  } catch (const qdsg::ValidationError& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return 2;
  } catch (const qdsg::ParseError& e) {
    std::fprintf(stderr, "config parse error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
