#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "hiergame/errors.hpp"
#include "hiergame/geometry.hpp"

namespace hiergame {

// Follower problem of one leader: the affine strongly monotone VI
//   find y in Y with  <phi(x, y), v - y> >= 0  for all v in Y,
//   phi(x, y) = B y - d - P x.
// mu is a strong-monotonicity modulus of the symmetric part of B and
// lipschitz bounds ||B||_2.
struct LowerLevelVi {
  Eigen::MatrixXd B;
  Eigen::VectorXd d;
  Eigen::MatrixXd P;
  ConvexSetSpec set;
  double mu = 0.0;
  double lipschitz = 0.0;

  int y_dim() const { return static_cast<int>(B.rows()); }
  int x_dim() const { return static_cast<int>(P.cols()); }

  void map(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
           Eigen::VectorXd& out) const {
    out.noalias() = B * y;
    out -= d;
    out.noalias() -= P * x;
  }
};

struct ViSolverConfig {
  double step = 0.0;  // 0 selects the default mu / L^2
  long max_iters = 200000;
  double tol = 1e-11;
};

namespace detail {

inline double vi_step(const LowerLevelVi& vi, const ViSolverConfig& cfg) {
  double gamma = cfg.step > 0.0 ? cfg.step : vi.mu / (vi.lipschitz * vi.lipschitz);
  if (!(vi.mu > 0.0) || !(vi.lipschitz >= vi.mu))
    throw ConfigError("lower-level VI: needs 0 < mu <= L");
  double rho_sq = 1.0 - 2.0 * gamma * vi.mu + gamma * gamma * vi.lipschitz * vi.lipschitz;
  if (!(rho_sq < 1.0))
    throw ConfigError("lower-level VI: step " + std::to_string(gamma) +
                      " is not contracting (rho^2 = " + std::to_string(rho_sq) + ")");
  return gamma;
}

inline double contraction_factor(const LowerLevelVi& vi, double gamma) {
  double rho_sq = 1.0 - 2.0 * gamma * vi.mu + gamma * gamma * vi.lipschitz * vi.lipschitz;
  return std::sqrt(std::max(0.0, rho_sq));
}

}  // namespace detail

// Natural residual ||y - Pi_Y(y - gamma phi(x, y))|| with gamma taken from
// cfg (default config when omitted).
inline double residual(const LowerLevelVi& vi, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& y,
                       const ViSolverConfig& cfg = {}) {
  if (x.size() != vi.x_dim() || y.size() != vi.y_dim())
    throw InputError("residual: dimension mismatch");
  double gamma = detail::vi_step(vi, cfg);
  Eigen::VectorXd phi(vi.y_dim());
  vi.map(x, y, phi);
  Eigen::VectorXd z = y - gamma * phi;
  vi.set.project_in_place(z);
  return (y - z).norm();
}

// Projected fixed-point iteration y <- Pi_Y(y - gamma phi(x, y)) from
// y0 = Pi_Y(0), run until the natural residual drops below cfg.tol.
inline Eigen::VectorXd solve_vi_exact(const LowerLevelVi& vi,
                                      const Eigen::VectorXd& x,
                                      const ViSolverConfig& cfg = {}) {
  if (x.size() != vi.x_dim()) throw InputError("solve_vi_exact: x dimension mismatch");
  double gamma = detail::vi_step(vi, cfg);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(vi.y_dim());
  vi.set.project_in_place(y);
  Eigen::VectorXd phi(vi.y_dim());
  Eigen::VectorXd next(vi.y_dim());
  double res = 0.0;
  for (long it = 0; it < cfg.max_iters; ++it) {
    vi.map(x, y, phi);
    next = y - gamma * phi;
    vi.set.project_in_place(next);
    res = (next - y).norm();
    y.swap(next);
    if (res <= cfg.tol) return y;
  }
  throw ConvergenceError("solve_vi_exact: residual " + std::to_string(res) +
                             " above tol after max_iters",
                         res);
}

// Deterministic eps-solution: iterate until the a-priori contraction bound
// rho^k ||y1 - y0|| / (1 - rho) <= eps certifies ||y^k - y(x)|| <= eps.
// Over-solving deterministically dominates the conditional-expectation
// contract the analysis asks of an eps-solution.
inline Eigen::VectorXd solve_vi_inexact(const LowerLevelVi& vi,
                                        const Eigen::VectorXd& x, double eps,
                                        const ViSolverConfig& cfg = {},
                                        long* iterations_used = nullptr) {
  if (!(eps > 0.0)) throw InputError("solve_vi_inexact: eps must be > 0");
  if (x.size() != vi.x_dim()) throw InputError("solve_vi_inexact: x dimension mismatch");
  double gamma = detail::vi_step(vi, cfg);
  double rho = detail::contraction_factor(vi, gamma);

  Eigen::VectorXd y = Eigen::VectorXd::Zero(vi.y_dim());
  vi.set.project_in_place(y);
  if (iterations_used) *iterations_used = 0;
  // y0 and y(x) both lie in Y, so the bound is met with no work at all.
  if (vi.set.diameter() <= eps) return y;

  Eigen::VectorXd phi(vi.y_dim());
  Eigen::VectorXd next(vi.y_dim());
  vi.map(x, y, phi);
  next = y - gamma * phi;
  vi.set.project_in_place(next);
  double d1 = (next - y).norm();
  if (d1 == 0.0) return y;  // y0 already the fixed point

  // Smallest k with rho^k d1 / (1 - rho) <= eps; k = 1 is the step above.
  long k_needed = 1;
  double bound = rho * d1 / (1.0 - rho);
  while (bound > eps) {
    ++k_needed;
    bound *= rho;
    if (k_needed > cfg.max_iters)
      throw ConvergenceError("solve_vi_inexact: eps bound not reachable within max_iters", bound);
  }
  y.swap(next);
  for (long it = 1; it < k_needed; ++it) {
    vi.map(x, y, phi);
    next = y - gamma * phi;
    vi.set.project_in_place(next);
    y.swap(next);
  }
  if (iterations_used) *iterations_used = k_needed;
  return y;
}

}  // namespace hiergame
