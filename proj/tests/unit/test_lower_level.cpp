#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "hiergame/game.hpp"
#include "hiergame/lower_level.hpp"

using Catch::Approx;
using Eigen::VectorXd;
using namespace hiergame;

namespace {

VectorXd scalar(double x) {
  VectorXd v(1);
  v[0] = x;
  return v;
}

}  // namespace

TEST_CASE("exact solver on the scalar follower", "[lower_level]") {
  auto game = make_benchmark("quad-duopoly");
  const auto& vi = game.lower[0];

  // interior fixed point y = x
  REQUIRE(solve_vi_exact(vi, scalar(0.5))[0] == Approx(0.5).margin(1e-10));

  // clamped boundary solution; phi(3, 2) = -1 pushes against the upper bound
  VectorXd y = solve_vi_exact(vi, scalar(3.0));
  REQUIRE(y[0] == Approx(2.0).margin(1e-10));
  VectorXd phi(1);
  vi.map(scalar(3.0), y, phi);
  for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0})
    REQUIRE(phi[0] * (v - y[0]) >= -1e-9);
}

TEST_CASE("exact solver matches the dense linear solve on hier-chain", "[lower_level]") {
  auto game = make_benchmark("hier-chain");
  const auto& vi = game.lower[0];
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd x(vi.x_dim());
    for (int i = 0; i < x.size(); ++i) x[i] = gauss(rng);
    VectorXd via_solver = solve_vi_exact(vi, x, {0.0, 200000, 1e-12});
    VectorXd via_lu = vi.B.partialPivLu().solve(vi.d + x);
    REQUIRE((via_solver - via_lu).norm() <= 1e-10);
  }
}

TEST_CASE("residual values", "[lower_level]") {
  auto game = make_benchmark("quad-duopoly");
  const auto& vi = game.lower[0];

  VectorXd y_star = solve_vi_exact(vi, scalar(0.5), {0.0, 200000, 1e-13});
  REQUIRE(residual(vi, scalar(0.5), y_star) <= 1e-12);

  // hand arithmetic: ||0.6 - clamp(0.6 - 0.5 * 0.1)|| = 0.05
  ViSolverConfig half_step;
  half_step.step = 0.5;
  REQUIRE(residual(vi, scalar(0.5), scalar(0.6), half_step) == Approx(0.05).margin(1e-14));
}

TEST_CASE("residual decays geometrically along the iteration", "[lower_level]") {
  auto game = make_benchmark("hier-chain");
  const auto& vi = game.lower[0];
  double gamma = vi.mu / (vi.lipschitz * vi.lipschitz);
  double rho = std::sqrt(1.0 - 2.0 * gamma * vi.mu + gamma * gamma * vi.lipschitz * vi.lipschitz);

  VectorXd x = VectorXd::Constant(vi.x_dim(), 0.8);
  VectorXd y = vi.set.project(VectorXd::Zero(vi.y_dim()));
  double prev = residual(vi, x, y);
  for (int k = 0; k < 40; ++k) {
    VectorXd phi(vi.y_dim());
    vi.map(x, y, phi);
    VectorXd next = y - gamma * phi;
    vi.set.project_in_place(next);
    y = next;
    double cur = residual(vi, x, y);
    if (prev > 1e-13) REQUIRE(cur <= (rho + 1e-9) * prev);
    prev = cur;
  }
}

TEST_CASE("inexact solver honours the a-priori bound", "[lower_level]") {
  auto game = make_benchmark("quad-duopoly");
  const auto& vi = game.lower[0];

  // eps at least the diameter of Y: the initial point is already admissible
  long iters = -1;
  VectorXd y0 = solve_vi_inexact(vi, scalar(0.5), vi.set.diameter() + 1.0, {}, &iters);
  REQUIRE(iters == 0);
  REQUIRE(y0[0] == 0.0);  // projection of the origin

  VectorXd y = solve_vi_inexact(vi, scalar(0.5), 1e-3);
  REQUIRE(std::abs(y[0] - 0.5) <= 1e-3);
}

TEST_CASE("inexact iteration count follows the contraction arithmetic", "[lower_level]") {
  auto game = make_benchmark("quad-duopoly");
  LowerLevelVi vi = game.lower[0];
  ViSolverConfig cfg;
  cfg.step = 0.5;  // rho = 0.5 for mu = L = 1
  double rho = 0.5;

  for (double eps : {1e-2, 1e-4, 1e-6}) {
    long iters = -1;
    (void)solve_vi_inexact(vi, scalar(1.7), eps, cfg, &iters);
    // d1 = ||y1 - y0|| with y0 = 0: y1 = clamp(0 - 0.5 * (0 - 1.7)) = 0.85
    double d1 = 0.85;
    double predicted = std::log(eps * (1.0 - rho) / d1) / std::log(rho);
    REQUIRE(std::abs(double(iters) - predicted) <= 1.0 + 1e-9);
  }
}

TEST_CASE("eps-contract holds on 1000 random inputs", "[lower_level]") {
  auto game = make_benchmark("hier-chain");
  const auto& vi = game.lower[0];
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> ux(-1.25, 1.25);
  std::uniform_real_distribution<double> ueps(1e-4, 0.5);
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXd x(vi.x_dim());
    for (int i = 0; i < x.size(); ++i) x[i] = ux(rng);
    double eps = ueps(rng);
    VectorXd y_eps = solve_vi_inexact(vi, x, eps);
    VectorXd y_ref = solve_vi_exact(vi, x, {0.0, 400000, 1e-13});
    REQUIRE((y_eps - y_ref).norm() <= eps + 1e-11);
  }
}

TEST_CASE("solution map is Lipschitz with modulus ||P|| / mu", "[lower_level]") {
  auto game = make_benchmark("hier-chain");
  const auto& vi = game.lower[0];
  double modulus = detail::spectral_norm(vi.P) / vi.mu;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> ux(-1.25, 1.25);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd a(vi.x_dim()), b(vi.x_dim());
    for (int i = 0; i < a.size(); ++i) {
      a[i] = ux(rng);
      b[i] = ux(rng);
    }
    VectorXd ya = solve_vi_exact(vi, a, {0.0, 400000, 1e-12});
    VectorXd yb = solve_vi_exact(vi, b, {0.0, 400000, 1e-12});
    REQUIRE((ya - yb).norm() <= modulus * (a - b).norm() + 1e-9);
  }
}

TEST_CASE("solver configuration guards", "[lower_level]") {
  auto game = make_benchmark("quad-duopoly");
  LowerLevelVi vi = game.lower[0];

  ViSolverConfig too_big;
  too_big.step = 2.5;  // outside (0, 2 mu / L^2)
  REQUIRE_THROWS_AS(solve_vi_exact(vi, scalar(0.5), too_big), ConfigError);

  LowerLevelVi broken = vi;
  broken.mu = 0.0;
  REQUIRE_THROWS_AS(solve_vi_exact(broken, scalar(0.5)), ConfigError);

  auto chain = make_benchmark("hier-chain");
  ViSolverConfig strict;
  strict.max_iters = 1;
  strict.tol = 1e-15;
  REQUIRE_THROWS_AS(solve_vi_exact(chain.lower[0], VectorXd::Zero(2), strict),
                    ConvergenceError);

  REQUIRE_THROWS_AS(solve_vi_inexact(vi, scalar(0.5), 0.0), InputError);
  REQUIRE_THROWS_AS(solve_vi_exact(vi, VectorXd::Zero(3)), InputError);
}
