#pragma once

#include <Eigen/Core>
#include <cmath>
#include <functional>
#include <random>

#include "hiergame/errors.hpp"
#include "hiergame/game.hpp"
#include "hiergame/rng.hpp"

namespace hiergame {

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

// Uniform draw from the unit sphere: normalized standard Gaussians. A zero
// draw (probability zero, but float underflow exists) is redrawn.
inline Eigen::VectorXd sample_sphere(int n, std::mt19937_64& rng) {
  if (n < 1) throw InputError("sample_sphere: dimension must be >= 1");
  for (;;) {
    Eigen::VectorXd w = gaussian_vector(rng, n);
    double norm = w.norm();
    if (norm > 0.0) return w / norm;
  }
}

// Finite-difference directional derivative (h(x + delta w) - h(x)) / delta.
// Exactly two evaluations of h.
inline double fd_directional(const ScalarFn& h, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& w, double delta) {
  if (!(delta > 0.0)) throw InputError("fd_directional: delta must be > 0");
  return (h(x + delta * w) - h(x)) / delta;
}

// Single-sample estimator H^delta_x(w) = n w (h(x + delta w) - h(x)) / delta,
// unbiased for the gradient of the ball-averaged smoothing of h.
inline Eigen::VectorXd spherical_grad(const ScalarFn& h,
                                      const Eigen::VectorXd& x, double delta,
                                      const Eigen::VectorXd& w) {
  return double(x.size()) * fd_directional(h, x, w, delta) * w;
}

// Mini-batch average of b single-sample estimators. h(x) is evaluated once
// and shared across the batch (h is deterministic). Counts b W-draws when a
// counter is supplied.
inline Eigen::VectorXd minibatch_H(const ScalarFn& h, const Eigen::VectorXd& x,
                                   double delta, long b, std::mt19937_64& rng,
                                   OracleCounters* counters = nullptr) {
  if (b < 1) throw InputError("minibatch_H: batch size must be >= 1");
  if (!(delta > 0.0)) throw InputError("minibatch_H: delta must be > 0");
  const int n = static_cast<int>(x.size());
  const double h0 = h(x);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  for (long s = 0; s < b; ++s) {
    Eigen::VectorXd w = sample_sphere(n, rng);
    acc += double(n) * ((h(x + delta * w) - h0) / delta) * w;
  }
  if (counters) counters->w_samples += b;
  return acc / double(b);
}

// Monte-Carlo estimate of the ball average h^delta(x): sphere direction
// scaled by delta U^{1/n} gives a uniform draw from the delta-ball.
inline double smoothed_value_mc(const ScalarFn& h, const Eigen::VectorXd& x,
                                double delta, long samples,
                                std::mt19937_64& rng) {
  if (samples < 1) throw InputError("smoothed_value_mc: samples must be >= 1");
  if (!(delta > 0.0)) throw InputError("smoothed_value_mc: delta must be > 0");
  const int n = static_cast<int>(x.size());
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double acc = 0.0;
  for (long s = 0; s < samples; ++s) {
    Eigen::VectorXd w = sample_sphere(n, rng);
    double radius = delta * std::pow(unif(rng), 1.0 / double(n));
    acc += h(x + radius * w);
  }
  return acc / double(samples);
}

// Inexact estimator H^{delta,eps}: finite differences through the
// eps-accurate implicit cost. eps = 0 routes through the exact oracle, so the
// two paths agree bitwise for the same draw.
inline Eigen::VectorXd spherical_grad_inexact(const HierarchicalGame& game,
                                              int i, const Eigen::VectorXd& x_i,
                                              double delta, double eps,
                                              const Eigen::VectorXd& w,
                                              OracleCounters* counters = nullptr) {
  if (!(delta > 0.0)) throw InputError("spherical_grad_inexact: delta must be > 0");
  if (eps < 0.0) throw InputError("spherical_grad_inexact: eps must be >= 0");
  auto h = [&](const Eigen::VectorXd& u) {
    return eps > 0.0 ? implicit_cost_inexact(game, i, u, eps, counters)
                     : implicit_cost(game, i, u, 1e-11, counters);
  };
  const int n = static_cast<int>(x_i.size());
  return double(n) * ((h(x_i + delta * w) - h(x_i)) / delta) * w;
}

}  // namespace hiergame
