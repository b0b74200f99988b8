#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hiergame/config.hpp"
#include "hiergame/metrics.hpp"
#include "hiergame/report.hpp"
#include "hiergame/solver.hpp"

namespace hiergame {

struct AggregateRow {
  int T = 0;
  std::uint64_t replica = 0;
  double final_gap = 0.0;
  double dist_least_norm = 0.0;
  std::uint64_t xi_count = 0;
  std::uint64_t w_count = 0;
  double wall_ms = 0.0;
};

// Least-squares fit of mean_gap ~ c * T^{-p} in log-log coordinates.
struct RateFit {
  std::vector<int> T_values;
  std::vector<double> mean_gap;
  double p = 0.0;
  double c = 0.0;
  double r_squared = 0.0;
};

struct SweepEntry {
  int T = 0;
  std::vector<RunReport> reports;          // successful replicas, ordered
  std::vector<std::string> replica_errors;  // empty strings for successes
};

struct ExperimentResult {
  std::vector<SweepEntry> sweeps;
  std::vector<AggregateRow> rows;
  std::optional<RateFit> rate_fit;
  std::size_t failed_replicas = 0;
  std::size_t total_replicas = 0;
};

inline RateFit fit_rate(const std::vector<int>& T_values,
                        const std::vector<double>& mean_gap) {
  if (T_values.size() != mean_gap.size() || T_values.size() < 2)
    throw InputError("fit_rate: need at least two sweep points");
  RateFit fit;
  fit.T_values = T_values;
  fit.mean_gap = mean_gap;
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < T_values.size(); ++i) {
    if (!(mean_gap[i] > 0.0))
      throw InputError("fit_rate: mean gaps must be positive for a log-log fit");
    xs.push_back(std::log(double(T_values[i])));
    ys.push_back(std::log(mean_gap[i]));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  double slope = sxx > 0 ? sxy / sxx : 0.0;
  fit.p = -slope;
  fit.c = std::exp(my - slope * mx);
  double ss_res = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double pred = my + slope * (xs[i] - mx);
    ss_res += (ys[i] - pred) * (ys[i] - pred);
  }
  fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

// Runs all replicas for all sweep values. Replica r always uses the streams
// derived from (master_seed, r) regardless of scheduling, so outputs are
// independent of thread interleaving. Failed replicas record their error and
// do not abort siblings.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const HierarchicalGame game = make_benchmark(cfg.benchmark, cfg.overrides);
  const MviProblem problem = assemble_mvi(game);

  std::vector<int> T_values = cfg.sweep;
  if (T_values.empty()) T_values = {cfg.schedule.T};

  ExperimentResult result;
  for (int T : T_values) {
    const Schedule schedule = cfg.make_schedule(T);
    SweepEntry entry;
    entry.T = T;
    entry.reports.resize(cfg.replicas);
    entry.replica_errors.assign(cfg.replicas, "");
    std::vector<char> ok(cfg.replicas, 0);

    auto run_replica = [&](int r) {
      try {
        RngBundle rng = make_run_rngs(cfg.master_seed, r);
        VrhgsOptions opt;
        opt.record_stride = cfg.record_stride;
        opt.gap_problem = &problem;
        opt.gap_config.tol = cfg.gap_tol;
        opt.master_seed = cfg.master_seed;
        opt.replica = static_cast<std::uint64_t>(r);
        entry.reports[r] = vrhgs(game, schedule, rng, opt);
        ok[r] = 1;
      } catch (const std::exception& e) {
        entry.replica_errors[r] = e.what();
      }
    };

    unsigned workers = std::max(1u, std::min<unsigned>(
                                        std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(cfg.replicas)));
    if (workers <= 1 || cfg.replicas == 1) {
      for (int r = 0; r < cfg.replicas; ++r) run_replica(r);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&]() {
          for (;;) {
            int r = next.fetch_add(1);
            if (r >= cfg.replicas) return;
            run_replica(r);
          }
        });
      for (auto& th : pool) th.join();
    }

    for (int r = 0; r < cfg.replicas; ++r) {
      result.total_replicas += 1;
      if (!ok[r]) {
        result.failed_replicas += 1;
        continue;
      }
      const RunReport& rep = entry.reports[r];
      AggregateRow row;
      row.T = T;
      row.replica = static_cast<std::uint64_t>(r);
      row.final_gap = rep.final_gap;
      row.dist_least_norm = rep.final_dist;
      row.xi_count = rep.counters.xi_samples;
      row.w_count = rep.counters.w_samples;
      row.wall_ms = rep.wall_ms;
      result.rows.push_back(row);
    }
    // Drop failed replicas from the report list but keep their error strings.
    std::vector<RunReport> kept;
    for (int r = 0; r < cfg.replicas; ++r)
      if (ok[r]) kept.push_back(std::move(entry.reports[r]));
    entry.reports = std::move(kept);
    result.sweeps.push_back(std::move(entry));
  }

  if (T_values.size() >= 2) {
    std::vector<double> means;
    bool fit_possible = true;
    for (std::size_t i = 0; i < T_values.size(); ++i) {
      double sum = 0.0;
      long cnt = 0;
      for (const auto& row : result.rows)
        if (row.T == T_values[i]) {
          sum += row.final_gap;
          ++cnt;
        }
      if (cnt == 0 || !(sum > 0.0)) fit_possible = false;
      means.push_back(cnt > 0 ? sum / cnt : 0.0);
    }
    if (fit_possible) result.rate_fit = fit_rate(T_values, means);
  }
  return result;
}

inline std::string aggregate_csv(const ExperimentResult& result,
                                 bool timing = false) {
  std::string out = "T,replica,final_gap,dist_least_norm,xi_count,w_count,wall_ms\n";
  for (const auto& row : result.rows) {
    out += std::to_string(row.T);
    out += ',';
    out += std::to_string(row.replica);
    out += ',';
    out += format_double(row.final_gap);
    out += ',';
    out += format_double(row.dist_least_norm);
    out += ',';
    out += std::to_string(row.xi_count);
    out += ',';
    out += std::to_string(row.w_count);
    out += ',';
    out += format_double(timing ? row.wall_ms : 0.0);
    out += '\n';
  }
  return out;
}

inline std::string ratefit_json(const RateFit& fit) {
  std::string out = "{\"T_values\":[";
  for (std::size_t i = 0; i < fit.T_values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(fit.T_values[i]);
  }
  out += "],\"mean_gap\":[";
  for (std::size_t i = 0; i < fit.mean_gap.size(); ++i) {
    if (i) out += ',';
    out += format_double(fit.mean_gap[i]);
  }
  out += "],\"p\":" + format_double(fit.p);
  out += ",\"c\":" + format_double(fit.c);
  out += ",\"r_squared\":" + format_double(fit.r_squared);
  out += "}\n";
  return out;
}

// Writes aggregate.csv, per-T report CSVs and JSONs, and ratefit.json when a
// sweep was run. All file writes happen on the calling thread.
inline void write_experiment_outputs(const ExperimentResult& result,
                                     const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  write_text_file((fs::path(cfg.out_dir) / "aggregate.csv").string(),
                  aggregate_csv(result, cfg.timing));
  for (const auto& entry : result.sweeps) {
    std::string stem = "report_T" + std::to_string(entry.T);
    write_text_file((fs::path(cfg.out_dir) / (stem + ".csv")).string(),
                    report_csv(entry.reports, cfg.timing));
    write_text_file((fs::path(cfg.out_dir) / ("runs_T" + std::to_string(entry.T) + ".json")).string(),
                    reports_json(entry.reports, cfg.timing));
  }
  if (result.rate_fit)
    write_text_file((fs::path(cfg.out_dir) / "ratefit.json").string(),
                    ratefit_json(*result.rate_fit));
}

}  // namespace hiergame
