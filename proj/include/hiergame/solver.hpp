#pragma once

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hiergame/errors.hpp"
#include "hiergame/game.hpp"
#include "hiergame/metrics.hpp"
#include "hiergame/rng.hpp"
#include "hiergame/smoothing.hpp"

namespace hiergame {

// ---------------------------------------------------------------------------
// Schedules
// ---------------------------------------------------------------------------

struct Schedule {
  enum class Family { Explicit, TheoremGap, AsConvergence };

  int T = 0;
  int K = 1;
  std::vector<double> gamma, eta, delta, eps;
  std::vector<std::int64_t> b;
  Family family = Family::Explicit;
  double gamma0 = 0.0, eta0 = 0.0;  // generator parameters (AsConvergence)
  double delta0 = 0.25;

  void validate() const {
    if (T < 1) throw InputError("schedule: T must be >= 1");
    if (K < 1) throw InputError("schedule: K must be >= 1");
    auto expect_len = [&](std::size_t len, const char* what) {
      if (len != static_cast<std::size_t>(T))
        throw InputError(std::string("schedule: ") + what + " must have length T");
    };
    expect_len(gamma.size(), "gamma");
    expect_len(eta.size(), "eta");
    expect_len(delta.size(), "delta");
    expect_len(eps.size(), "eps");
    expect_len(b.size(), "b");
    for (int t = 0; t < T; ++t) {
      if (!(gamma[t] > 0.0)) throw InputError("schedule: gamma_t must be > 0");
      if (!(eta[t] > 0.0)) throw InputError("schedule: eta_t must be > 0");
      double ge = gamma[t] * eta[t];
      if (!(ge > 0.0 && ge < 0.5))
        throw InputError("schedule: gamma_t * eta_t must lie in (0, 1/2)");
      if (!(delta[t] > 0.0 && delta[t] <= delta0 + 1e-15))
        throw InputError("schedule: delta_t must lie in (0, delta0]");
      if (b[t] < 1) throw InputError("schedule: b_t must be >= 1");
      if (eps[t] < 0.0) throw InputError("schedule: eps_t must be >= 0");
    }
  }
};

// gamma_t = eta_t = delta_t = 1/T, K = T, b_t = T^2, exact lower level.
inline Schedule theorem_gap_schedule(int T, double delta0 = 0.25) {
  if (T < 4)
    throw InputError("theorem_gap_schedule: T must be >= 4 so that 1/T <= delta0");
  Schedule s;
  s.T = T;
  s.K = T;
  s.family = Schedule::Family::TheoremGap;
  s.delta0 = delta0;
  s.gamma.assign(T, 1.0 / T);
  s.eta.assign(T, 1.0 / T);
  s.delta.assign(T, 1.0 / T);
  s.eps.assign(T, 0.0);
  s.b.assign(T, static_cast<std::int64_t>(T) * T);
  s.validate();
  return s;
}

// Same as the gap schedule with inexact lower-level solves at eps_t = 1/T^2.
inline Schedule inexact_gap_schedule(int T, double delta0 = 0.25) {
  Schedule s = theorem_gap_schedule(T, delta0);
  s.eps.assign(T, 1.0 / (double(T) * double(T)));
  return s;
}

// Polynomially decaying schedule meeting the almost-sure convergence
// conditions: gamma_t = gamma0 (t+1)^{-0.6}, eta_t = eta0 (t+1)^{-0.25},
// delta_t = min(delta0, (t+1)^{-0.5}), b_t = ceil((t+1)^{0.5}), K fixed.
inline Schedule as_convergence_schedule(int T, double gamma0 = 0.1,
                                        double eta0 = 0.5, int K = 5,
                                        double delta0 = 0.25) {
  if (!(gamma0 > 0.0) || !(eta0 > 0.0) || !(gamma0 * eta0 < 0.5))
    throw InputError("as_convergence_schedule: need gamma0, eta0 > 0 with gamma0 * eta0 < 1/2");
  Schedule s;
  s.T = T;
  s.K = K;
  s.family = Schedule::Family::AsConvergence;
  s.gamma0 = gamma0;
  s.eta0 = eta0;
  s.delta0 = delta0;
  s.gamma.resize(T);
  s.eta.resize(T);
  s.delta.resize(T);
  s.eps.assign(T, 0.0);
  s.b.resize(T);
  for (int t = 0; t < T; ++t) {
    double tp = double(t) + 1.0;
    s.gamma[t] = gamma0 * std::pow(tp, -0.6);
    s.eta[t] = eta0 * std::pow(tp, -0.25);
    s.delta[t] = std::min(delta0, std::pow(tp, -0.5));
    s.b[t] = static_cast<std::int64_t>(std::ceil(std::sqrt(tp)));
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Numeric verification of the almost-sure convergence conditions (a)-(c)
// ---------------------------------------------------------------------------
//
// The certification targets power-law-like sequences: limits are verified by
// fitting the log-log decay slope over the tail, series convergence /
// divergence by comparing the fitted exponent against the integral-test
// threshold (exponent < -1 converges, >= -1 diverges).

struct ScheduleConditionsReport {
  bool a_ok = false, b_ok = false, c_ok = false;
  bool asymptotics_applicable = true;
  std::string note;

  double sum_gamma_sq = 0.0, sum_gamma_eta = 0.0, c_partial_sum = 0.0;
  double gamma_eta_ratio_final = 0.0, delta_eta_ratio_final = 0.0;
  double c_limit_final = 0.0;
  double slope_gamma_over_eta = 0.0, slope_delta_over_eta = 0.0;
  double slope_gamma_sq = 0.0, slope_gamma_eta = 0.0;
  double slope_eta = 0.0, slope_c_term = 0.0, slope_c_limit = 0.0;

  bool all_ok() const { return a_ok && b_ok && c_ok; }
};

namespace detail {

// Log-log slope of seq(t) over a geometric grid in [horizon/100, horizon].
// Sequences that vanish identically get slope -inf (treated as decaying).
inline double loglog_slope(const std::function<double(long)>& seq, long horizon) {
  std::vector<double> xs, ys;
  long lo = std::max<long>(2, horizon / 100);
  for (int i = 0; i < 48; ++i) {
    double f = double(i) / 47.0;
    long t = static_cast<long>(std::llround(lo * std::pow(double(horizon) / lo, f)));
    t = std::min<long>(std::max<long>(t, lo), horizon);
    double v = seq(t - 1);  // 0-based index
    if (v > 0.0 && std::isfinite(v)) {
      xs.push_back(std::log(double(t)));
      ys.push_back(std::log(v));
    }
  }
  if (xs.size() < 8) return -std::numeric_limits<double>::infinity();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= xs.size();
  my /= ys.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  return den > 0 ? num / den : 0.0;
}

}  // namespace detail

inline ScheduleConditionsReport check_schedule_conditions(const Schedule& s,
                                                          long horizon) {
  ScheduleConditionsReport rep;

  std::function<double(long)> gamma_at, eta_at, delta_at;
  long effective_horizon = horizon;
  switch (s.family) {
    case Schedule::Family::AsConvergence: {
      double g0 = s.gamma0, e0 = s.eta0, d0 = s.delta0;
      gamma_at = [g0](long t) { return g0 * std::pow(double(t) + 1.0, -0.6); };
      eta_at = [e0](long t) { return e0 * std::pow(double(t) + 1.0, -0.25); };
      delta_at = [d0](long t) { return std::min(d0, std::pow(double(t) + 1.0, -0.5)); };
      break;
    }
    case Schedule::Family::TheoremGap: {
      // Finite-horizon recipe; asymptotic conditions are checked on the
      // constant extension and flagged as not applicable.
      rep.asymptotics_applicable = false;
      rep.note = "finite-horizon schedule, conditions not applicable (checked on constant extension)";
      double g = s.gamma[0], e = s.eta[0], d = s.delta[0];
      gamma_at = [g](long) { return g; };
      eta_at = [e](long) { return e; };
      delta_at = [d](long) { return d; };
      break;
    }
    case Schedule::Family::Explicit: {
      effective_horizon = std::min<long>(horizon, s.T);
      if (effective_horizon < horizon)
        rep.note = "explicit schedule shorter than requested horizon; checked up to T";
      gamma_at = [&s](long t) { return s.gamma[static_cast<std::size_t>(t)]; };
      eta_at = [&s](long t) { return s.eta[static_cast<std::size_t>(t)]; };
      delta_at = [&s](long t) { return s.delta[static_cast<std::size_t>(t)]; };
      break;
    }
  }

  bool ge_in_range = true;
  double sum_gsq = 0.0, sum_ge = 0.0, sum_c = 0.0;
  double eta_prev = eta_at(0);  // eta_{-1} := eta_0, so the t = 0 term vanishes
  for (long t = 0; t < effective_horizon; ++t) {
    double g = gamma_at(t), e = eta_at(t);
    double ge = g * e;
    if (!(ge > 0.0 && ge < 0.5)) ge_in_range = false;
    sum_gsq += g * g;
    sum_ge += ge;
    double rel = (e - eta_prev) / e;
    sum_c += rel * rel * (1.0 + 1.0 / ge);
    eta_prev = e;
  }
  rep.sum_gamma_sq = sum_gsq;
  rep.sum_gamma_eta = sum_ge;
  rep.c_partial_sum = sum_c;

  auto c_term = [&](long t) {
    if (t == 0) return 0.0;
    double e = eta_at(t), ep = eta_at(t - 1), ge = gamma_at(t) * eta_at(t);
    double rel = (e - ep) / e;
    return rel * rel * (1.0 + 1.0 / ge);
  };
  auto c_limit = [&](long t) { return c_term(t) / (gamma_at(t) * eta_at(t)); };

  rep.slope_gamma_over_eta =
      detail::loglog_slope([&](long t) { return gamma_at(t) / eta_at(t); }, effective_horizon);
  rep.slope_delta_over_eta =
      detail::loglog_slope([&](long t) { return delta_at(t) / eta_at(t); }, effective_horizon);
  rep.slope_gamma_sq =
      detail::loglog_slope([&](long t) { double g = gamma_at(t); return g * g; }, effective_horizon);
  rep.slope_gamma_eta =
      detail::loglog_slope([&](long t) { return gamma_at(t) * eta_at(t); }, effective_horizon);
  rep.slope_eta = detail::loglog_slope(eta_at, effective_horizon);
  rep.slope_c_term = detail::loglog_slope(c_term, effective_horizon);
  rep.slope_c_limit = detail::loglog_slope(c_limit, effective_horizon);

  rep.gamma_eta_ratio_final = gamma_at(effective_horizon - 1) / eta_at(effective_horizon - 1);
  rep.delta_eta_ratio_final = delta_at(effective_horizon - 1) / eta_at(effective_horizon - 1);
  rep.c_limit_final = c_limit(effective_horizon - 1);

  const double kDecay = -0.02;     // certified "-> 0"
  const double kConverge = -1.05;  // exponent strictly below -1
  const double kDiverge = -1.02;   // exponent >= -1 (within fit noise)
  rep.a_ok = rep.slope_gamma_over_eta <= kDecay && rep.slope_delta_over_eta <= kDecay &&
             rep.slope_gamma_sq <= kConverge && rep.slope_gamma_eta >= kDiverge;
  rep.b_ok = ge_in_range && rep.slope_eta <= kDecay;
  rep.c_ok = rep.slope_c_term <= kConverge && rep.slope_c_limit <= kDecay;
  return rep;
}

// ---------------------------------------------------------------------------
// SFBF inner loop (exact and inexact paths share the implementation; eps = 0
// selects the exact implicit-cost oracle)
// ---------------------------------------------------------------------------

// Anchored mini-batch feedback prepared in the outer loop.
struct EpochInputs {
  Eigen::VectorXd xbar;  // anchor x^t
  Eigen::VectorXd vbar;  // mini-batch estimate of V(x^t)
  Eigen::VectorXd hbar;  // mini-batch smoothed-gradient estimate at x^t
};

struct SfbfParams {
  double gamma = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double eps = 0.0;  // 0 selects exact lower-level solves
  int K = 1;
};

struct SfbfResult {
  Eigen::VectorXd z_last;                  // z_K
  Eigen::VectorXd z_avg;                   // (1/K) sum_k z_{k+1/2}
  std::vector<Eigen::VectorXd> half_steps;  // inner trace
};

// Draw order inside one inner step is frozen for reproducibility:
// (1) one xi-draw shared by the oracle queries at z_{k+1/2} and at the
//     anchor, (2) one sphere direction per player, in player order, shared
//     by the two finite differences of that player.
inline SfbfResult sfbf(const HierarchicalGame& game, const EpochInputs& in,
                       const SfbfParams& p, RngBundle& rng,
                       OracleCounters& counters, int epoch_label = -1) {
  if (in.xbar.size() != game.n || in.vbar.size() != game.n || in.hbar.size() != game.n)
    throw InputError("sfbf: epoch input dimension mismatch");
  if (!(p.gamma > 0.0) || !(p.delta > 0.0) || p.K < 1 || p.eta < 0.0 || p.eps < 0.0)
    throw InputError("sfbf: invalid parameters");
  if (!(p.gamma * p.eta < 0.5)) throw InputError("sfbf: gamma * eta must be < 1/2");

  auto h_eval = [&](int i, const Eigen::VectorXd& u) {
    return p.eps > 0.0 ? implicit_cost_inexact(game, i, u, p.eps, &counters)
                       : implicit_cost(game, i, u, 1e-11, &counters);
  };

  const Eigen::VectorXd anchor_drift = in.vbar + p.eta * in.xbar + in.hbar;
  // h_i at the anchor block is reused across all K steps and both estimator
  // evaluations; the lower-level solves are deterministic so this is exact.
  std::vector<double> h_at_anchor(game.num_players);
  for (int i = 0; i < game.num_players; ++i)
    h_at_anchor[i] = h_eval(i, game.block(in.xbar, i));

  SfbfResult out;
  out.half_steps.reserve(p.K);
  Eigen::VectorXd z = in.xbar;
  Eigen::VectorXd z_half(game.n), correction(game.n);
  Eigen::VectorXd z_avg = Eigen::VectorXd::Zero(game.n);

  for (int k = 0; k < p.K; ++k) {
    z_half = z - p.gamma * anchor_drift;
    if (!z_half.allFinite())
      throw NumericError("sfbf: non-finite half-step at epoch " +
                         std::to_string(epoch_label) + ", inner step " + std::to_string(k));
    game.joint_set.project_in_place(z_half);

    auto [v_z, v_anchor] = sample_upper_pair(game, z_half, in.xbar, rng.xi, counters);
    correction = (v_z - v_anchor) + p.eta * (z_half - in.xbar);

    for (int i = 0; i < game.num_players; ++i) {
      const int ni = game.dims[i];
      Eigen::VectorXd w = sample_sphere(ni, rng.w);
      counters.w_samples += 1;
      Eigen::VectorXd z_i = z_half.segment(game.offsets[i], ni);
      Eigen::VectorXd x_i = in.xbar.segment(game.offsets[i], ni);
      double fd_z = (h_eval(i, z_i + p.delta * w) - h_eval(i, z_i)) / p.delta;
      double fd_x = (h_eval(i, x_i + p.delta * w) - h_at_anchor[i]) / p.delta;
      correction.segment(game.offsets[i], ni) += double(ni) * (fd_z - fd_x) * w;
    }

    z = z_half - p.gamma * correction;
    if (!z.allFinite())
      throw NumericError("sfbf: non-finite iterate at epoch " +
                         std::to_string(epoch_label) + ", inner step " + std::to_string(k));
    z_avg += z_half;
    out.half_steps.push_back(z_half);
  }
  out.z_last = std::move(z);
  out.z_avg = z_avg / double(p.K);
  return out;
}

// ---------------------------------------------------------------------------
// VR-HGS outer loop
// ---------------------------------------------------------------------------

struct RunReport {
  std::uint64_t master_seed = 0;
  std::uint64_t replica = 0;
  std::vector<int> dims;

  std::vector<Eigen::VectorXd> iterates;        // x^t after each epoch
  std::vector<Eigen::VectorXd> epoch_averages;  // z-bar^t
  Eigen::VectorXd weighted_average;             // gamma-weighted z-bar^T

  std::vector<int> recorded_epochs;  // 1-based epoch counts
  std::vector<double> gap_series;    // gap of the running weighted average
  std::vector<double> dist_series;   // ||x^t - x*|| when ground truth known
  std::vector<OracleCounters> counter_series;

  OracleCounters counters;
  double wall_ms = 0.0;

  double final_gap = std::numeric_limits<double>::quiet_NaN();
  double final_dist = std::numeric_limits<double>::quiet_NaN();

  StrategyProfile last_profile() const {
    return StrategyProfile::from_flat(iterates.back(), dims);
  }
};

struct VrhgsOptions {
  std::optional<Eigen::VectorXd> x0;   // default: projection of the origin
  int record_stride = 0;               // 0: record only the final epoch
  const MviProblem* gap_problem = nullptr;
  GapConfig gap_config;
  std::optional<Eigen::VectorXd> x_star;  // overrides the game's ground truth
  bool store_trajectory = true;
  std::uint64_t master_seed = 0;  // bookkeeping copied into the report
  std::uint64_t replica = 0;
};

inline RunReport vrhgs(const HierarchicalGame& game, const Schedule& schedule,
                       RngBundle& rng, const VrhgsOptions& opt = {}) {
  schedule.validate();
  if (schedule.delta0 > game.delta0 + 1e-15)
    throw ConfigError("vrhgs: schedule delta0 exceeds the game's enlargement radius");

  const auto t_start = std::chrono::steady_clock::now();
  RunReport rep;
  rep.master_seed = opt.master_seed;
  rep.replica = opt.replica;
  rep.dims = game.dims;

  Eigen::VectorXd x = opt.x0 ? *opt.x0 : Eigen::VectorXd::Zero(game.n);
  game.joint_set.project_in_place(x);

  const Eigen::VectorXd* x_star = nullptr;
  if (opt.x_star)
    x_star = &*opt.x_star;
  else if (game.ground_truth)
    x_star = &game.ground_truth->x_star;

  Eigen::VectorXd weighted_sum = Eigen::VectorXd::Zero(game.n);
  double weight_total = 0.0;

  for (int t = 0; t < schedule.T; ++t) {
    EpochInputs in;
    in.xbar = x;
    in.vbar = minibatch_V(game, x, schedule.b[t], rng.xi, rep.counters);
    in.hbar.resize(game.n);
    for (int i = 0; i < game.num_players; ++i) {
      auto h_i = [&](const Eigen::VectorXd& u) {
        return schedule.eps[t] > 0.0
                   ? implicit_cost_inexact(game, i, u, schedule.eps[t], &rep.counters)
                   : implicit_cost(game, i, u, 1e-11, &rep.counters);
      };
      in.hbar.segment(game.offsets[i], game.dims[i]) =
          minibatch_H(h_i, game.block(x, i), schedule.delta[t], schedule.b[t],
                      rng.w, &rep.counters);
    }

    SfbfParams p;
    p.gamma = schedule.gamma[t];
    p.eta = schedule.eta[t];
    p.delta = schedule.delta[t];
    p.eps = schedule.eps[t];
    p.K = schedule.K;
    SfbfResult inner = sfbf(game, in, p, rng, rep.counters, t);

    x = inner.z_last;
    weighted_sum += schedule.gamma[t] * inner.z_avg;
    weight_total += schedule.gamma[t];

    if (opt.store_trajectory) {
      rep.iterates.push_back(x);
      rep.epoch_averages.push_back(inner.z_avg);
    }

    const int epoch = t + 1;
    const bool last = (t == schedule.T - 1);
    if (last || (opt.record_stride > 0 && epoch % opt.record_stride == 0)) {
      rep.recorded_epochs.push_back(epoch);
      double g = std::numeric_limits<double>::quiet_NaN();
      if (opt.gap_problem) {
        Eigen::VectorXd zbar = weighted_sum / weight_total;
        opt.gap_problem->set.project_in_place(zbar);
        g = gap(*opt.gap_problem, zbar, opt.gap_config);
      }
      rep.gap_series.push_back(g);
      double dist = x_star ? (x - *x_star).norm()
                           : std::numeric_limits<double>::quiet_NaN();
      rep.dist_series.push_back(dist);
      rep.counter_series.push_back(rep.counters);
      if (last) {
        rep.final_gap = g;
        rep.final_dist = dist;
      }
    }
  }

  if (!opt.store_trajectory) rep.iterates.push_back(x);
  rep.weighted_average = weighted_sum / weight_total;
  rep.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t_start)
                    .count();
  return rep;
}

}  // namespace hiergame
