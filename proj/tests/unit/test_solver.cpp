#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "hiergame/report.hpp"
#include "hiergame/solver.hpp"

using Catch::Approx;
using Eigen::VectorXd;
using namespace hiergame;

namespace {

VectorXd vec2(double a, double b) {
  VectorXd v(2);
  v << a, b;
  return v;
}

Schedule tiny_schedule(int T, int K, double gamma, double eta, double delta,
                       std::int64_t b, double eps = 0.0) {
  Schedule s;
  s.T = T;
  s.K = K;
  s.gamma.assign(T, gamma);
  s.eta.assign(T, eta);
  s.delta.assign(T, delta);
  s.eps.assign(T, eps);
  s.b.assign(T, b);
  s.validate();
  return s;
}

}  // namespace

TEST_CASE("schedule constructors and guards", "[solver]") {
  Schedule s = theorem_gap_schedule(10);
  REQUIRE(s.gamma[0] == Approx(0.1));
  REQUIRE(s.b[0] == 100);
  REQUIRE(s.K == 10);
  REQUIRE(s.gamma[3] * s.eta[3] == Approx(0.01));
  REQUIRE_THROWS_AS(theorem_gap_schedule(3), InputError);

  Schedule si = inexact_gap_schedule(10);
  REQUIRE(si.eps[0] == Approx(0.01));
  REQUIRE(si.eps[0] / si.delta[0] == Approx(0.1));
  si.eps.assign(10, 0.0);
  REQUIRE(si.gamma == s.gamma);
  REQUIRE(si.eps == s.eps);
  REQUIRE(si.b == s.b);

  Schedule sa = as_convergence_schedule(100, 0.1, 0.5);
  REQUIRE(sa.gamma[0] == Approx(0.1));
  REQUIRE(sa.eta[0] == Approx(0.5));
  REQUIRE(sa.K == 5);
  REQUIRE(sa.gamma[9] / sa.eta[9] ==
          Approx((0.1 / 0.5) * std::pow(10.0, -0.35)).epsilon(1e-12));
  REQUIRE(sa.delta[0] == Approx(0.25));
  REQUIRE(sa.b[3] == 2);
  REQUIRE_THROWS_AS(as_convergence_schedule(100, 1.0, 0.6), InputError);

  Schedule bad = tiny_schedule(2, 1, 0.1, 0.1, 0.1, 1);
  bad.delta[1] = 0.5;  // above delta0
  REQUIRE_THROWS_AS(bad.validate(), InputError);
  bad = tiny_schedule(2, 1, 0.1, 0.1, 0.1, 1);
  bad.eta[0] = 10.0;  // gamma * eta = 1 >= 1/2
  REQUIRE_THROWS_AS(bad.validate(), InputError);
  bad = tiny_schedule(2, 1, 0.1, 0.1, 0.1, 1);
  bad.gamma.pop_back();
  REQUIRE_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("schedule condition checker", "[solver]") {
  auto good = check_schedule_conditions(as_convergence_schedule(100, 0.1, 0.5), 1000000);
  REQUIRE(good.asymptotics_applicable);
  REQUIRE(good.a_ok);
  REQUIRE(good.b_ok);
  REQUIRE(good.c_ok);
  REQUIRE(good.slope_gamma_over_eta == Approx(-0.35).margin(0.01));
  REQUIRE(good.slope_c_limit == Approx(-0.3).margin(0.01));

  // constant extension of the finite-horizon recipe: sum gamma^2 diverges
  auto flat = check_schedule_conditions(theorem_gap_schedule(10), 1000000);
  REQUIRE_FALSE(flat.asymptotics_applicable);
  REQUIRE_FALSE(flat.a_ok);
  REQUIRE(!flat.note.empty());

  // eta never vanishes: condition (b) must fail
  Schedule s;
  s.T = 20000;
  s.K = 1;
  s.gamma.resize(s.T);
  s.eta.assign(s.T, 1.0);
  s.delta.resize(s.T);
  s.eps.assign(s.T, 0.0);
  s.b.assign(s.T, 1);
  for (int t = 0; t < s.T; ++t) {
    s.gamma[t] = 0.4 / (t + 1.0);
    s.delta[t] = 0.25 * std::pow(t + 1.0, -0.5);
  }
  s.validate();
  auto noeta = check_schedule_conditions(s, s.T);
  REQUIRE(noeta.a_ok);  // gamma/eta -> 0, sum gamma^2 < inf, sum gamma eta = inf
  REQUIRE_FALSE(noeta.b_ok);
}

TEST_CASE("inner loop fixes the solution point", "[solver]") {
  BenchmarkOverrides over;
  over.noise_scale = 0.0;
  auto g = make_benchmark("nonunique-line", over);

  EpochInputs in;
  in.xbar = vec2(0.5, 0.5);  // on the solution line, V = 0, h == 0
  in.vbar = true_upper_gradient(g, in.xbar);
  in.hbar = VectorXd::Zero(2);
  REQUIRE(in.vbar.norm() == 0.0);

  SfbfParams p;
  p.gamma = 0.1;
  p.eta = 0.0;  // the regularization pull is switched off
  p.delta = 0.1;
  p.K = 5;
  RngBundle rng = make_run_rngs(1, 0);
  OracleCounters counters;
  SfbfResult r = sfbf(g, in, p, rng, counters);
  REQUIRE((r.z_last - in.xbar).norm() == 0.0);
  REQUIRE((r.z_avg - in.xbar).norm() == 0.0);
  for (const auto& z : r.half_steps) REQUIRE((z - in.xbar).norm() == 0.0);
}

TEST_CASE("single inner step equals a hand-rolled Tseng update", "[solver]") {
  auto g = make_benchmark("quad-duopoly");

  EpochInputs in;
  in.xbar = vec2(0.3, -0.2);
  in.vbar = vec2(-0.55, 0.4);  // arbitrary anchored estimates
  in.hbar = vec2(0.7, -0.35);
  SfbfParams p;
  p.gamma = 0.04;
  p.eta = 0.5;
  p.delta = 0.05;
  p.K = 1;

  RngBundle rng = make_run_rngs(2024, 3);
  RngBundle replay = rng;  // copy of the engine state
  OracleCounters counters;
  SfbfResult r = sfbf(g, in, p, rng, counters);
  REQUIRE(counters.xi_samples == 2);
  REQUIRE(counters.w_samples == 2);

  // straight-line reimplementation of the two update formulas
  VectorXd z_half = in.xbar - p.gamma * (in.vbar + p.eta * in.xbar + in.hbar);
  g.joint_set.project_in_place(z_half);
  VectorXd xi = g.sigma_xi() * gaussian_vector(replay.xi, 2);
  VectorXd v_z = g.oracle.M * z_half + g.oracle.q + xi;
  VectorXd v_x = g.oracle.M * in.xbar + g.oracle.q + xi;
  VectorXd corr = (v_z - v_x) + p.eta * (z_half - in.xbar);
  for (int i = 0; i < 2; ++i) {
    VectorXd w = sample_sphere(1, replay.w);
    auto h = [&](double u) {
      VectorXd v(1);
      v << u;
      return implicit_cost(g, i, v, 1e-11);
    };
    double fd_z = (h(z_half[i] + p.delta * w[0]) - h(z_half[i])) / p.delta;
    double fd_x = (h(in.xbar[i] + p.delta * w[0]) - h(in.xbar[i])) / p.delta;
    corr[i] += 1.0 * (fd_z - fd_x) * w[0];
  }
  VectorXd z1 = z_half - p.gamma * corr;

  REQUIRE((r.half_steps[0] - z_half).norm() <= 1e-15);
  REQUIRE((r.z_last - z1).norm() <= 1e-14);
  REQUIRE((r.z_avg - z_half).norm() <= 1e-15);
}

TEST_CASE("inner loop draw accounting", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  EpochInputs in;
  in.xbar = vec2(0.0, 0.0);
  in.vbar = true_upper_gradient(g, in.xbar);
  in.hbar = VectorXd::Zero(2);
  SfbfParams p;
  p.gamma = 0.02;
  p.eta = 0.5;
  p.delta = 0.05;
  p.K = 13;
  RngBundle rng = make_run_rngs(8, 0);
  OracleCounters counters;
  (void)sfbf(g, in, p, rng, counters);
  REQUIRE(counters.xi_samples == std::uint64_t(p.K) * g.num_players);
  REQUIRE(counters.w_samples == std::uint64_t(p.K) * g.num_players);
}

TEST_CASE("full-step correction vanishes term by term at the anchor", "[solver]") {
  BenchmarkOverrides over;
  over.noise_scale = 0.0;
  auto g = make_benchmark("quad-duopoly", over);
  RngBundle rng = make_run_rngs(5, 1);
  OracleCounters counters;
  VectorXd x = vec2(0.25, -0.4);
  auto [va, vb] = sample_upper_pair(g, x, x, rng.xi, counters);
  REQUIRE((va - vb).norm() == 0.0);
  for (int i = 0; i < 2; ++i) {
    VectorXd w = sample_sphere(1, rng.w);
    ScalarFn h = [&](const VectorXd& u) { return implicit_cost(g, i, u, 1e-11); };
    VectorXd block = x.segment(i, 1);
    VectorXd ha = spherical_grad(h, block, 0.05, w);
    VectorXd hb = spherical_grad(h, block, 0.05, w);
    REQUIRE((ha - hb).norm() == 0.0);
  }
}

TEST_CASE("outer loop on a deterministic single epoch", "[solver]") {
  BenchmarkOverrides over;
  over.noise_scale = 0.0;
  auto g = make_benchmark("quad-duopoly", over);
  Schedule s = tiny_schedule(1, 1, 0.1, 0.1, 0.1, 3);

  RngBundle rng = make_run_rngs(99, 0);
  RngBundle replay = rng;
  auto rep = vrhgs(g, s, rng);

  // reference epoch: x0 = 0, V-bar = q exactly, H-bar over three shared draws
  VectorXd x0 = VectorXd::Zero(2);
  VectorXd vbar = g.oracle.q;
  VectorXd hbar(2);
  for (int i = 0; i < 2; ++i) {
    auto h = [&](double u) {
      VectorXd v(1);
      v << u;
      return implicit_cost(g, i, v, 1e-11);
    };
    double h0 = h(x0[i]);
    double acc = 0.0;
    for (int sdraw = 0; sdraw < 3; ++sdraw) {
      VectorXd w = sample_sphere(1, replay.w);
      acc += ((h(x0[i] + 0.1 * w[0]) - h0) / 0.1) * w[0];
    }
    hbar[i] = acc / 3.0;
  }
  VectorXd z_half = x0 - 0.1 * (vbar + 0.1 * x0 + hbar);
  g.joint_set.project_in_place(z_half);
  VectorXd v_z = g.oracle.M * z_half + g.oracle.q;
  VectorXd v_x = g.oracle.M * x0 + g.oracle.q;
  VectorXd corr = (v_z - v_x) + 0.1 * (z_half - x0);
  for (int i = 0; i < 2; ++i) {
    VectorXd w = sample_sphere(1, replay.w);
    auto h = [&](double u) {
      VectorXd v(1);
      v << u;
      return implicit_cost(g, i, v, 1e-11);
    };
    double fd_z = (h(z_half[i] + 0.1 * w[0]) - h(z_half[i])) / 0.1;
    double fd_x = (h(x0[i] + 0.1 * w[0]) - h(x0[i])) / 0.1;
    corr[i] += (fd_z - fd_x) * w[0];
  }
  VectorXd x1 = z_half - 0.1 * corr;

  REQUIRE(rep.iterates.size() == 1);
  REQUIRE((rep.iterates[0] - x1).norm() <= 1e-14);
  REQUIRE((rep.epoch_averages[0] - z_half).norm() <= 1e-15);
  REQUIRE((rep.weighted_average - z_half).norm() <= 1e-15);
  REQUIRE(rep.counters.xi_samples == 3 * 2 + 1 * 2);
  REQUIRE(rep.counters.w_samples == 3 * 2 + 1 * 2);
}

TEST_CASE("runs are bitwise reproducible", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  Schedule s = theorem_gap_schedule(5);
  auto p = assemble_mvi(g);
  VrhgsOptions opt;
  opt.gap_problem = &p;
  opt.record_stride = 2;

  RngBundle rng1 = make_run_rngs(123, 7);
  auto a = vrhgs(g, s, rng1, opt);
  RngBundle rng2 = make_run_rngs(123, 7);
  auto b = vrhgs(g, s, rng2, opt);
  a.wall_ms = b.wall_ms = 0.0;
  REQUIRE(a == b);

  RngBundle rng3 = make_run_rngs(123, 8);  // different replica, different path
  auto c = vrhgs(g, s, rng3, opt);
  c.wall_ms = 0.0;
  REQUIRE_FALSE(a == c);
}

TEST_CASE("weighted average is the gamma-weighted convex combination", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  Schedule s = as_convergence_schedule(12, 0.1, 0.5);
  RngBundle rng = make_run_rngs(77, 0);
  auto rep = vrhgs(g, s, rng);
  VectorXd acc = VectorXd::Zero(2);
  double wsum = 0.0;
  for (int t = 0; t < s.T; ++t) {
    acc += s.gamma[t] * rep.epoch_averages[t];
    wsum += s.gamma[t];
  }
  REQUIRE((rep.weighted_average - acc / wsum).norm() <= 1e-12);

  // counters never decrease across recorded epochs
  for (std::size_t j = 1; j < rep.counter_series.size(); ++j) {
    REQUIRE(rep.counter_series[j].xi_samples >= rep.counter_series[j - 1].xi_samples);
    REQUIRE(rep.counter_series[j].w_samples >= rep.counter_series[j - 1].w_samples);
  }
}

TEST_CASE("half steps stay feasible", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  EpochInputs in;
  in.xbar = vec2(0.9, -0.9);
  in.vbar = vec2(3.0, -3.0);
  in.hbar = vec2(-1.0, 1.0);
  SfbfParams p;
  p.gamma = 0.3;
  p.eta = 1.0;
  p.delta = 0.2;
  p.K = 20;
  RngBundle rng = make_run_rngs(55, 0);
  OracleCounters counters;
  auto r = sfbf(g, in, p, rng, counters);
  for (const auto& z : r.half_steps) REQUIRE(g.joint_set.contains(z, 1e-12));
  REQUIRE(r.z_last.allFinite());
}

TEST_CASE("oracle counters match the audited formula", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  Schedule s;
  s.T = 5;
  s.K = 7;
  s.gamma.assign(5, 0.05);
  s.eta.assign(5, 0.5);
  s.delta.assign(5, 0.1);
  s.eps.assign(5, 0.0);
  s.b = {2, 3, 4, 5, 6};
  s.validate();
  RngBundle rng = make_run_rngs(31, 0);
  auto rep = vrhgs(g, s, rng);
  std::int64_t expect = oracle_count(5, 7, s.b, 2);
  REQUIRE(std::int64_t(rep.counters.xi_samples + rep.counters.w_samples) == expect);
}

TEST_CASE("non-finite epoch inputs raise a numeric error", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  EpochInputs in;
  in.xbar = vec2(0.0, 0.0);
  in.vbar = VectorXd::Constant(2, std::numeric_limits<double>::quiet_NaN());
  in.hbar = VectorXd::Zero(2);
  SfbfParams p;
  p.gamma = 0.1;
  p.eta = 0.1;
  p.delta = 0.1;
  p.K = 1;
  RngBundle rng = make_run_rngs(1, 0);
  OracleCounters counters;
  REQUIRE_THROWS_AS(sfbf(g, in, p, rng, counters), NumericError);
}

TEST_CASE("inexact epochs stay close to exact ones on paired streams", "[solver]") {
  auto g = make_benchmark("quad-duopoly");
  Schedule exact = theorem_gap_schedule(6);
  Schedule inexact = inexact_gap_schedule(6);
  RngBundle r1 = make_run_rngs(7, 0), r2 = make_run_rngs(7, 0);
  auto a = vrhgs(g, exact, r1);
  auto b = vrhgs(g, inexact, r2);
  REQUIRE((a.iterates.back() - b.iterates.back()).norm() <= 0.05);
}
