#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hiergame/config.hpp"
#include "hiergame/experiment.hpp"
#include "hiergame/report.hpp"

using Catch::Approx;
using namespace hiergame;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "hiergame_tests";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream f(p);
  f << content;
  return p.string();
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.benchmark = "quad-duopoly";
  cfg.scheme = "exact";
  cfg.schedule.type = ScheduleSpec::Type::TheoremGap;
  cfg.schedule.T = 5;
  cfg.replicas = 3;
  cfg.master_seed = 321;
  cfg.record_stride = 2;
  return cfg;
}

}  // namespace

TEST_CASE("minimal config parses", "[cli]") {
  std::string path = write_temp("minimal.json", R"({
    "benchmark": "quad-duopoly",
    "scheme": "exact",
    "schedule": {"type": "theorem_gap", "T": 20},
    "replicas": 10,
    "master_seed": 42
  })");
  ExperimentConfig cfg = parse_config(path);
  REQUIRE(cfg.benchmark == "quad-duopoly");
  REQUIRE(cfg.schedule.T == 20);
  REQUIRE(cfg.replicas == 10);
  REQUIRE(cfg.master_seed == 42);
  REQUIRE(cfg.scheme == "exact");
}

TEST_CASE("config rejections", "[cli]") {
  REQUIRE_THROWS_AS(parse_config(write_temp("bad_T.json", R"({
    "benchmark": "quad-duopoly", "scheme": "exact",
    "schedule": {"type": "theorem_gap", "T": 3},
    "replicas": 1, "master_seed": 1
  })")),
                    ConfigError);

  REQUIRE_THROWS_AS(parse_config(write_temp("bad_replicas.json", R"({
    "benchmark": "quad-duopoly", "scheme": "exact",
    "schedule": {"type": "theorem_gap", "T": 20},
    "replicas": 0, "master_seed": 1
  })")),
                    ConfigError);

  try {
    parse_config(write_temp("unknown_key.json", R"({
      "benchmark": "quad-duopoly", "scheme": "exact",
      "schedule": {"type": "theorem_gap", "T": 20, "epochs": 5},
      "replicas": 1, "master_seed": 1
    })"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    REQUIRE(std::string(e.what()).find("epochs") != std::string::npos);
  }

  REQUIRE_THROWS_AS(parse_config(write_temp("bad_bench.json", R"({
    "benchmark": "no-such", "scheme": "exact",
    "schedule": {"type": "theorem_gap", "T": 20},
    "replicas": 1, "master_seed": 1
  })")),
                    ConfigError);

  REQUIRE_THROWS_AS(parse_config(write_temp("bad_scheme.json", R"({
    "benchmark": "quad-duopoly", "scheme": "both",
    "schedule": {"type": "theorem_gap", "T": 20},
    "replicas": 1, "master_seed": 1
  })")),
                    ConfigError);

  REQUIRE_THROWS_AS(parse_config(write_temp("not_json.json", "{ benchmark: }")),
                    ConfigError);

  // inexact lower-level solves go with the finite-horizon recipe only
  REQUIRE_THROWS_AS(parse_config(write_temp("as_inexact.json", R"({
    "benchmark": "quad-duopoly", "scheme": "inexact",
    "schedule": {"type": "as_convergence", "T": 100},
    "replicas": 1, "master_seed": 1
  })")),
                    ConfigError);
}

TEST_CASE("set specs round-trip through the config schema", "[cli]") {
  Eigen::VectorXd lo(2), hi(2), c(3);
  lo << -1, 0;
  hi << 1, 2;
  c << 0.5, -0.5, 0;
  auto spec = ConvexSetSpec::product({ConvexSetSpec::box(lo, hi),
                                      ConvexSetSpec::ball(c, 1.5),
                                      ConvexSetSpec::simplex(4)});
  ConvexSetSpec back = set_spec_from_json(set_spec_to_json(spec));
  REQUIRE(back.dim() == spec.dim());
  std::mt19937_64 rng(6);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd w(spec.dim());
    for (int i = 0; i < w.size(); ++i) w[i] = 2.0 * gauss(rng);
    REQUIRE((spec.project(w) - back.project(w)).norm() == 0.0);
  }
  REQUIRE(back.diameter() == spec.diameter());

  REQUIRE_THROWS_AS(set_spec_from_json(nlohmann::json{{"variant", "cone"}}), ConfigError);
  REQUIRE_THROWS_AS(set_spec_from_json(nlohmann::json{{"variant", "simplex"}, {"dim", 0}}),
                    ConfigError);
}

TEST_CASE("csv emission", "[cli]") {
  const std::string header = "t,replica,gap,dist_least_norm,xi_count,w_count,wall_ms\n";
  REQUIRE(report_csv({}) == header);

  // one epoch, one replica: exactly one data row
  auto g = make_benchmark("quad-duopoly");
  Schedule s;
  s.T = 1;
  s.K = 1;
  s.gamma = {0.1};
  s.eta = {0.1};
  s.delta = {0.1};
  s.eps = {0.0};
  s.b = {1};
  RngBundle rng = make_run_rngs(1, 0);
  auto rep = vrhgs(g, s, rng);
  std::string csv = report_csv({rep});
  REQUIRE(csv.rfind(header, 0) == 0);
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 2);

  REQUIRE(format_double(0.1) == "0.10000000000000001");
  REQUIRE(format_double(1.0) == "1");
}

TEST_CASE("json round trip", "[cli]") {
  auto g = make_benchmark("quad-duopoly");
  auto p = assemble_mvi(g);
  Schedule s = theorem_gap_schedule(4);
  RngBundle rng = make_run_rngs(11, 2);
  VrhgsOptions opt;
  opt.gap_problem = &p;
  opt.record_stride = 1;
  opt.master_seed = 11;
  opt.replica = 2;
  auto rep = vrhgs(g, s, rng, opt);

  std::string text = report_json(rep, true);
  RunReport back = report_from_json(nlohmann::json::parse(text));
  REQUIRE(back == rep);
}

TEST_CASE("experiment determinism and replica independence", "[cli]") {
  ExperimentConfig cfg = small_config();
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  REQUIRE(aggregate_csv(a) == aggregate_csv(b));
  REQUIRE(report_csv(a.sweeps[0].reports) == report_csv(b.sweeps[0].reports));

  // dropping the last replica leaves the other rows untouched
  ExperimentConfig cfg2 = small_config();
  cfg2.replicas = 2;
  auto c = run_experiment(cfg2);
  for (int r = 0; r < 2; ++r) {
    auto ra = a.sweeps[0].reports[r];
    auto rc = c.sweeps[0].reports[r];
    ra.wall_ms = rc.wall_ms = 0.0;
    REQUIRE(ra == rc);
  }
}

TEST_CASE("gap column is recomputable from the stored average", "[cli]") {
  ExperimentConfig cfg = small_config();
  cfg.gap_tol = 1e-11;
  auto result = run_experiment(cfg);
  auto game = make_benchmark(cfg.benchmark);
  auto problem = assemble_mvi(game);
  for (const auto& rep : result.sweeps[0].reports) {
    Eigen::VectorXd z = rep.weighted_average;
    problem.set.project_in_place(z);
    GapConfig gc;
    gc.tol = cfg.gap_tol;
    REQUIRE(std::abs(gap(problem, z, gc) - rep.final_gap) <= 1e-10);
  }
}

TEST_CASE("rate fit on synthetic data and a tiny sweep", "[cli]") {
  std::vector<int> T = {10, 20, 40, 80};
  std::vector<double> mean;
  for (int t : T) mean.push_back(3.7 / t);
  RateFit fit = fit_rate(T, mean);
  REQUIRE(fit.p == Approx(1.0).margin(1e-12));
  REQUIRE(fit.c == Approx(3.7).margin(1e-12));
  REQUIRE(fit.r_squared == Approx(1.0).margin(1e-12));

  ExperimentConfig cfg = small_config();
  cfg.replicas = 2;
  cfg.sweep = {4, 6};
  auto result = run_experiment(cfg);
  REQUIRE(result.rate_fit.has_value());
  REQUIRE(std::isfinite(result.rate_fit->p));
  REQUIRE(result.rows.size() == 4);
}

TEST_CASE("replica failures are recorded without aborting siblings", "[cli]") {
  // a wildly oversized step drives the unprojected full step outside the
  // enlarged set, so every replica hits the oracle domain guard in epoch 1
  ExperimentConfig cfg;
  cfg.benchmark = "quad-duopoly";
  cfg.schedule.type = ScheduleSpec::Type::Explicit;
  cfg.schedule.T = 2;
  cfg.schedule.K = 2;
  cfg.schedule.gamma = {1e9, 1e9};
  cfg.schedule.eta = {1e-10, 1e-10};
  cfg.schedule.delta = {0.1, 0.1};
  cfg.schedule.eps = {0.0, 0.0};
  cfg.schedule.b = {1, 1};
  cfg.replicas = 3;
  cfg.master_seed = 5;
  auto result = run_experiment(cfg);
  REQUIRE(result.failed_replicas == result.total_replicas);
  REQUIRE(result.sweeps[0].reports.empty());
  for (const auto& err : result.sweeps[0].replica_errors) REQUIRE_FALSE(err.empty());
}

TEST_CASE("output files are written", "[cli]") {
  ExperimentConfig cfg = small_config();
  cfg.out_dir = (fs::temp_directory_path() / "hiergame_tests" / "out").string();
  fs::remove_all(cfg.out_dir);
  auto result = run_experiment(cfg);
  write_experiment_outputs(result, cfg);
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "aggregate.csv"));
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "report_T5.csv"));
  REQUIRE(fs::exists(fs::path(cfg.out_dir) / "runs_T5.json"));

  // wall_ms column is zero unless timing was requested
  std::ifstream f(fs::path(cfg.out_dir) / "aggregate.csv");
  std::string header, line;
  std::getline(f, header);
  REQUIRE(header == "T,replica,final_gap,dist_least_norm,xi_count,w_count,wall_ms");
  std::getline(f, line);
  REQUIRE(line.substr(line.rfind(',') + 1) == "0");
}
