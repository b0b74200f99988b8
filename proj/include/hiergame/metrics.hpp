#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hiergame/errors.hpp"
#include "hiergame/game.hpp"
#include "hiergame/geometry.hpp"

namespace hiergame {

// Deterministic ground-truth machinery for the mixed variational inequality
//   find x* in X:  <V(x*), z - x*> + h(z) - h(x*) >= 0  for all z in X,
// restricted to affine V = (M, q) and separable quadratic h so that the gap
// maximization below is provably concave.
struct MviProblem {
  Eigen::MatrixXd M;
  Eigen::VectorXd q;
  QuadraticCost h;  // joint quadratic; zero matrix for h == 0
  ConvexSetSpec set;

  int dim() const { return static_cast<int>(q.size()); }

  Eigen::VectorXd field(const Eigen::VectorXd& x) const { return M * x + q; }

  double lipschitz_V() const { return detail::spectral_norm(M); }
  double lipschitz_grad_h() const { return detail::spectral_norm(h.Q); }

  void validate() const {
    if (detail::min_sym_eigenvalue(M) < -1e-10)
      throw ConfigError("MviProblem: symmetric part of M must be PSD");
    if (detail::min_sym_eigenvalue(h.Q) < -1e-10)
      throw ConfigError("MviProblem: h must be convex");
  }
};

struct GapConfig {
  double tol = 1e-10;
  long max_iters = 2000000;
};

// Gap function Gamma(x) = sup_{z in X} <V(z), x - z> + h(x) - h(z),
// computed by projected gradient ascent on the concave z-objective starting
// from z = x. Nonnegative by construction since the start value is zero.
inline double gap(const MviProblem& p, const Eigen::VectorXd& x,
                  const GapConfig& cfg = {}) {
  if (!(cfg.tol > 0.0)) throw ConfigError("gap: tol must be > 0");
  if (x.size() != p.dim()) throw InputError("gap: dimension mismatch");
  p.validate();

  const Eigen::MatrixXd Msym = p.M + p.M.transpose();
  const double L = detail::spectral_norm(Msym + p.h.Q);
  const double step = L > 0.0 ? 1.0 / L : 1.0;

  auto grad = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    // d/dz [ <M z + q, x - z> - h(z) ]
    return p.M.transpose() * (x - z) - (p.M * z + p.q) - p.h.gradient(z);
  };
  auto value = [&](const Eigen::VectorXd& z) {
    return (p.M * z + p.q).dot(x - z) + p.h.value(x) - p.h.value(z);
  };

  Eigen::VectorXd z = p.set.project(x);
  double res = 0.0;
  for (long it = 0; it < cfg.max_iters; ++it) {
    Eigen::VectorXd g = grad(z);
    // Stop on the unit-step projected-gradient mapping.
    res = (z - p.set.project(z + g)).norm();
    if (res <= cfg.tol) return value(z);
    Eigen::VectorXd znext = p.set.project(z + step * g);
    z.swap(znext);
  }
  throw ConvergenceError("gap: projected-gradient mapping above tol after max_iters", res);
}

// Deterministic Tseng forward-backward-forward iteration on V^eta + grad h,
// run until the natural residual drops below tol. For eta > 0 the solution
// s(eta) is unique; for eta = 0 any solution with small residual is returned
// (not necessarily least-norm).
inline Eigen::VectorXd solve_mvi(const MviProblem& p, double eta, double tol,
                                 long max_iters = 50000000,
                                 const Eigen::VectorXd* warm_start = nullptr) {
  if (eta < 0.0) throw InputError("solve_mvi: eta must be >= 0");
  if (!(tol > 0.0)) throw InputError("solve_mvi: tol must be > 0");
  p.validate();
  const double step = 0.9 / (p.lipschitz_V() + p.lipschitz_grad_h() + eta);
  const Eigen::MatrixXd J = p.M + p.h.Q + eta * Eigen::MatrixXd::Identity(p.dim(), p.dim());

  auto field = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return p.M * x + p.q + p.h.gradient(x) + eta * x;
  };

  Eigen::VectorXd x = warm_start ? p.set.project(*warm_start)
                                 : p.set.project(Eigen::VectorXd::Zero(p.dim()));
  double res = 0.0;
  for (long it = 0; it < max_iters; ++it) {
    Eigen::VectorXd half = p.set.project(x - step * field(x));
    res = (x - half).norm();
    if (res <= tol) return half;
    x = half - step * (J * (half - x));
  }
  throw ConvergenceError("solve_mvi: natural residual " + std::to_string(res) +
                             " above tol after max_iters",
                         res);
}

// Tikhonov continuation toward the least-norm solution: halve eta from 1,
// warm-starting each stage, until consecutive solutions move by at most tol.
inline Eigen::VectorXd least_norm(const MviProblem& p, double tol,
                                  double eta0 = 1.0, int max_stages = 60) {
  if (!(tol > 0.0)) throw InputError("least_norm: tol must be > 0");
  double eta = eta0;
  // Inner residual small enough that the measured consecutive step reflects
  // the true path drift: distance error ~ residual * (1 + sL)/(s eta).
  auto inner_tol = [&](double e) {
    double s = 0.9 / (p.lipschitz_V() + p.lipschitz_grad_h() + e);
    return std::max(1e-14, 0.05 * tol * s * e);
  };
  Eigen::VectorXd prev = solve_mvi(p, eta, inner_tol(eta));
  for (int stage = 0; stage < max_stages; ++stage) {
    eta *= 0.5;
    Eigen::VectorXd cur = solve_mvi(p, eta, inner_tol(eta), 50000000, &prev);
    if ((cur - prev).norm() <= tol) return cur;
    prev = std::move(cur);
  }
  throw ConvergenceError("least_norm: continuation budget exceeded", eta);
}

struct TikPathEntry {
  double eta = 0.0;
  double lhs = 0.0;  // (|eta_t - eta_{t-1}| / eta_t) * ||x_ln||
  double rhs = 0.0;  // ||s(eta_t) - s(eta_{t-1})||
  bool ok = false;
};

struct TikPathReport {
  std::vector<TikPathEntry> pairs;
  bool all_ok = true;
};

// Consecutive-pair check of the Tikhonov path inequality. The printed form
// has eta_t - eta_{t-1} <= 0 for decreasing sequences while the right side is
// a norm; the derivation bounds with the absolute difference, which is what
// is evaluated here (sign-convention note, not a correction).
inline TikPathReport tik_path_check(const MviProblem& p,
                                    const std::vector<double>& etas,
                                    double tol) {
  if (etas.size() < 2) throw InputError("tik_path_check: need at least two etas");
  for (std::size_t i = 0; i + 1 < etas.size(); ++i)
    if (!(etas[i] >= etas[i + 1]) || !(etas[i + 1] > 0.0))
      throw InputError("tik_path_check: etas must be nonincreasing and positive");

  double x_ln_norm = least_norm(p, tol).norm();
  TikPathReport report;
  Eigen::VectorXd prev = solve_mvi(p, etas[0], tol * 1e-2);
  for (std::size_t t = 1; t < etas.size(); ++t) {
    Eigen::VectorXd cur = solve_mvi(p, etas[t], tol * 1e-2, 50000000, &prev);
    TikPathEntry e;
    e.eta = etas[t];
    e.lhs = (std::abs(etas[t] - etas[t - 1]) / etas[t]) * x_ln_norm;
    e.rhs = (cur - prev).norm();
    e.ok = e.lhs >= e.rhs - 2.0 * tol;
    report.all_ok = report.all_ok && e.ok;
    report.pairs.push_back(e);
    prev = std::move(cur);
  }
  return report;
}

// Exact oracle-complexity audit: 2 K T N + 2 N sum_t b_t.
inline std::int64_t oracle_count(std::int64_t T, std::int64_t K,
                                 const std::vector<std::int64_t>& b_list,
                                 std::int64_t N) {
  if (static_cast<std::int64_t>(b_list.size()) != T)
    throw InputError("oracle_count: b_list length must equal T");
  std::int64_t sum_b = 0;
  for (auto b : b_list) sum_b += b;
  return 2 * K * T * N + 2 * N * sum_b;
}

// The MVI whose solutions are the game's hierarchical equilibria (upper-level
// component); requires benchmarks carrying the exact quadratic h.
inline MviProblem assemble_mvi(const HierarchicalGame& game) {
  if (game.analytic_h.empty())
    throw ConfigError("assemble_mvi: game has no exact implicit-cost form");
  MviProblem p;
  p.M = game.oracle.M;
  p.q = game.oracle.q;
  p.h.Q = Eigen::MatrixXd::Zero(game.n, game.n);
  p.h.c = Eigen::VectorXd::Zero(game.n);
  p.h.r = 0.0;
  for (int i = 0; i < game.num_players; ++i) {
    p.h.Q.block(game.offsets[i], game.offsets[i], game.dims[i], game.dims[i]) =
        game.analytic_h[i].Q;
    p.h.c.segment(game.offsets[i], game.dims[i]) = game.analytic_h[i].c;
    p.h.r += game.analytic_h[i].r;
  }
  p.set = game.joint_set;
  p.validate();
  return p;
}

}  // namespace hiergame
