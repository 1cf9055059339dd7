#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "qdsg/errors.hpp"
#include "qdsg/harness.hpp"
#include "test_util.hpp"

using namespace qdsg;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n = 6;
  cfg.d = 2;
  cfg.radius = 2.0;  // complete graph
  cfg.seed = 4;
  cfg.loss = LossKind::absolute;
  cfg.bits = 10;
  cfg.rounds = 60;
  cfg.log_every = 1;
  cfg.ref_tol = 1e-10;
  return cfg;
}

}  // namespace

TEST_CASE("config defaults survive a minimal file") {
  auto dir = test_util::fresh_dir("config_min");
  {
    std::ofstream out(dir + "/min.json");
    out << "{\"n\": 12, \"d\": 3}\n";
  }
  ExperimentConfig cfg = load_config(dir + "/min.json");
  CHECK(cfg.n == 12);
  CHECK(cfg.d == 3);
  ExperimentConfig defaults;
  CHECK(cfg.radius == defaults.radius);
  CHECK(cfg.bits == defaults.bits);
  CHECK(cfg.rounds == defaults.rounds);
  CHECK(cfg.loss == defaults.loss);
}

TEST_CASE("config validation failures name the field") {
  ExperimentConfig cfg;
  cfg.bits = 0;
  try {
    validate(cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "bits");
  }
  cfg.bits = 8;
  cfg.stop = StopRule::relative_gap;
  cfg.stop_tau = 0.0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
}

TEST_CASE("config parse failures") {
  CHECK_THROWS_AS(config_from_json_text("{"), ParseError);
  CHECK_THROWS_AS(config_from_json_text("[1,2]"), ParseError);
  CHECK_THROWS_AS(config_from_json_text("{\"no_such_key\": 1}"), ParseError);
  CHECK_THROWS_AS(config_from_json_text("{\"loss\": \"huber\"}"), ValidationError);
}

TEST_CASE("config save/load round trip") {
  ExperimentConfig cfg = small_config();
  cfg.schedule = ScheduleKind::inv_linear;
  cfg.scale_a = 7.5;
  cfg.stop = StopRule::relative_gap;
  cfg.stop_tau = 0.01;
  cfg.out_dir = "somewhere";
  auto dir = test_util::fresh_dir("config_rt");
  save_config(cfg, dir + "/c.json");
  ExperimentConfig back = load_config(dir + "/c.json");
  CHECK(config_to_json_text(back) == config_to_json_text(cfg));
  // and a second save/load is a fixed point
  save_config(back, dir + "/c2.json");
  CHECK(slurp(dir + "/c.json") == slurp(dir + "/c2.json"));
}

TEST_CASE("run_experiment writes metrics and complete metadata") {
  ExperimentConfig cfg = small_config();
  cfg.rounds = 50;
  cfg.log_every = 7;
  cfg.out_dir = test_util::fresh_dir("run_files");
  cfg.export_graph = true;
  cfg.export_dataset = true;
  RunRecord rec = run_experiment(cfg);

  // row count: round 0, every log_every-th round, and the final round
  const std::string csv = slurp(cfg.out_dir + "/metrics.csv");
  const long rows = std::count(csv.begin(), csv.end(), '\n') - 1;  // minus header
  CHECK(rows == (cfg.rounds + cfg.log_every - 1) / cfg.log_every + 1);
  CHECK(static_cast<long>(rec.samples()) == rows);

  // metadata holds everything needed to re-derive gamma
  const std::string meta = slurp(cfg.out_dir + "/metadata.json");
  for (const char* key : {"\"gamma\"", "\"sigma2\"", "\"lipschitz_total\"", "\"bits\"",
                          "\"n\"", "\"d\"", "\"f_star\"", "\"assumption2_satisfied\""})
    CHECK(meta.find(key) != std::string::npos);

  // graph and dataset exports exist
  CHECK(std::ifstream(cfg.out_dir + "/graph.edges").good());
  CHECK(std::ifstream(cfg.out_dir + "/graph.coords").good());
  Dataset exported = load_dataset(cfg.out_dir + "/dataset.txt");
  CHECK(exported.size() == cfg.n);

  // violation counters and bit totals are cumulative, never decreasing
  for (std::size_t i = 1; i < rec.samples(); ++i) {
    CHECK(rec.containment_violations[i] >= rec.containment_violations[i - 1]);
    CHECK(rec.delta_violations[i] >= rec.delta_violations[i - 1]);
    CHECK(rec.consensus_violations[i] >= rec.consensus_violations[i - 1]);
    CHECK(rec.out_of_range_total[i] >= rec.out_of_range_total[i - 1]);
    CHECK(rec.bits_transmitted[i] >= rec.bits_transmitted[i - 1]);
  }
}

TEST_CASE("gamma in the record is consistent with its ingredients") {
  ExperimentConfig cfg = small_config();
  RunRecord rec = run_experiment(cfg);
  CHECK(rec.gamma ==
        doctest::Approx(48.0 * (2.0 + rec.lipschitz_total) / (1.0 - rec.sigma2)).epsilon(1e-12));
}

TEST_CASE("two invocations produce byte-identical outputs") {
  ExperimentConfig cfg = small_config();
  cfg.rounds = 40;
  cfg.out_dir = test_util::fresh_dir("repro_a");
  run_experiment(cfg);
  auto dir_b = test_util::fresh_dir("repro_b");
  cfg.out_dir = dir_b;
  run_experiment(cfg);
  CHECK(slurp(dir_b + "/metrics.csv") == slurp(dir_b + "/../repro_a/metrics.csv"));
}

TEST_CASE("qdsg and dsg share graph, dataset and start point under one seed") {
  ExperimentConfig cq = small_config();
  cq.rounds = 1;
  ExperimentConfig cd = cq;
  cd.algorithm = Algorithm::dsg;
  RunRecord rq = run_experiment(cq);
  RunRecord rd = run_experiment(cd);
  // same problem: identical reference solution and spectral data
  CHECK(rq.f_star == rd.f_star);
  CHECK(rq.sigma2 == rd.sigma2);
  CHECK(rq.lipschitz_total == rd.lipschitz_total);
  // identical start: round-0 gap matches exactly
  CHECK(rq.gap_tracked[0] == rd.gap_tracked[0]);
  CHECK(rq.consensus_fro[0] == 0.0);
  CHECK(rd.consensus_fro[0] == 0.0);
}

TEST_CASE("f_star in the record matches an independent re-solve") {
  ExperimentConfig cfg = small_config();
  cfg.rounds = 5;
  RunRecord rec = run_experiment(cfg);
  Dataset data = generate_dataset(cfg.n, cfg.d, dataset_seed(cfg.seed));
  Box box = symmetric_unit_box(cfg.d);
  auto objs = make_objectives(data, cfg.loss, cfg.lambda, box);
  ReferenceSolution sol = solve_reference(objs, box, cfg.ref_tol);
  CHECK(std::fabs(sol.f_star - rec.f_star) <= 2.0 * cfg.ref_tol);
}

TEST_CASE("empty bit list yields an empty sweep") {
  ExperimentConfig cfg = small_config();
  SweepResult r = sweep_bits(cfg, {});
  CHECK(r.entries.empty());
}

TEST_CASE("wide codewords reach the target like the unquantized baseline") {
  // the initial point is a grid point of the b-bit box grid, so the baseline
  // must run with identical bits for a seed-matched comparison
  ExperimentConfig cfg = small_config();
  cfg.n = 8;
  cfg.loss = LossKind::quadratic;
  cfg.bits = 52;
  cfg.rounds = 30000;
  cfg.stop = StopRule::relative_gap;
  cfg.stop_tau = 0.05;
  SweepResult sweep = sweep_bits(cfg, {52});
  REQUIRE(sweep.entries.size() == 1);
  REQUIRE(sweep.entries[0].target_reached);

  ExperimentConfig dsg_cfg = cfg;
  dsg_cfg.algorithm = Algorithm::dsg;
  RunRecord rec = run_experiment(dsg_cfg);
  REQUIRE(rec.stop_round >= 0);
  const double ratio = static_cast<double>(sweep.entries[0].iterations) /
                       static_cast<double>(rec.stop_round);
  CHECK(ratio >= 0.99);
  CHECK(ratio <= 1.01);
}

TEST_CASE("sweep iterations do not increase with more bits") {
  ExperimentConfig cfg = small_config();
  cfg.n = 8;
  cfg.loss = LossKind::quadratic;
  cfg.rounds = 200000;
  cfg.stop = StopRule::relative_gap;
  cfg.stop_tau = 0.05;
  cfg.log_every = 1;
  // well-separated bit levels; each start point is a different grid point,
  // so only order the levels whose speeds differ by far more than that noise
  SweepResult sweep = sweep_bits(cfg, {4, 6, 8});
  REQUIRE(sweep.entries.size() == 3);
  for (const auto& e : sweep.entries) {
    INFO("bits=", e.bits, " iterations=", e.iterations);
    CHECK(e.target_reached);
  }
  for (std::size_t i = 1; i < sweep.entries.size(); ++i)
    CHECK(sweep.entries[i].iterations <= sweep.entries[i - 1].iterations);
}

TEST_CASE("interpolating data: stop rule falls back to the absolute gap") {
  // two absolute-loss samples in three unknowns interpolate, so f* is zero
  // up to the solver certificate and a relative gap would divide by zero
  ExperimentConfig cfg;
  cfg.n = 2;
  cfg.d = 3;
  cfg.radius = 2.0;
  cfg.seed = 3;
  cfg.loss = LossKind::absolute;
  cfg.bits = 12;
  cfg.ref_tol = 1e-13;
  cfg.rounds = 200000;
  cfg.stop = StopRule::relative_gap;
  cfg.stop_tau = 0.02;
  RunRecord rec = run_experiment(cfg);
  REQUIRE(std::fabs(rec.f_star) < 1e-12);
  REQUIRE(rec.stop_round > 0);
  CHECK(rec.gap_max.back() <= 0.02);
}

TEST_CASE("plot data emission") {
  ExperimentConfig cfg = small_config();
  cfg.rounds = 20;
  RunRecord rec = run_experiment(cfg);
  auto dir = test_util::fresh_dir("plots");
  emit_plot_data({{"demo", &rec}}, dir);
  const std::string csv = slurp(dir + "/curve_demo.csv");
  CHECK(csv.rfind("round,gap,consensus_error,delta,delta_bound\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(rec.samples()) + 1);
  CHECK_THROWS_AS(emit_plot_data({}, dir), ValidationError);
}
