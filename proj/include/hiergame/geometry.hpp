#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hiergame/errors.hpp"

namespace hiergame {

// Projectable convex sets with closed-form Euclidean projections: boxes,
// balls, the standard simplex, and finite products of those. All instances
// are nonempty, compact and convex; diameters are exact.
class ConvexSetSpec {
 public:
  enum class Kind { Box, Ball, Simplex, Product };

  // Default-constructed specs are zero-dimensional placeholders; build real
  // sets through the factories below.
  ConvexSetSpec() = default;

  static ConvexSetSpec box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw InputError("box: lo/hi dimension mismatch or empty");
    for (int i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw InputError("box: requires lo <= hi componentwise");
    ConvexSetSpec s;
    s.kind_ = Kind::Box;
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    s.dim_ = static_cast<int>(s.lo_.size());
    return s;
  }

  static ConvexSetSpec ball(Eigen::VectorXd center, double radius) {
    if (center.size() == 0) throw InputError("ball: empty center");
    if (!(radius > 0.0)) throw InputError("ball: radius must be positive");
    ConvexSetSpec s;
    s.kind_ = Kind::Ball;
    s.center_ = std::move(center);
    s.radius_ = radius;
    s.dim_ = static_cast<int>(s.center_.size());
    return s;
  }

  static ConvexSetSpec simplex(int dim) {
    if (dim < 1) throw InputError("simplex: dim must be >= 1");
    ConvexSetSpec s;
    s.kind_ = Kind::Simplex;
    s.dim_ = dim;
    return s;
  }

  static ConvexSetSpec product(std::vector<ConvexSetSpec> parts) {
    if (parts.empty()) throw InputError("product: needs at least one factor");
    ConvexSetSpec s;
    s.kind_ = Kind::Product;
    s.dim_ = 0;
    for (const auto& p : parts) s.dim_ += p.dim();
    s.parts_ = std::move(parts);
    return s;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Eigen::VectorXd& box_lo() const { return lo_; }
  const Eigen::VectorXd& box_hi() const { return hi_; }
  const Eigen::VectorXd& ball_center() const { return center_; }
  double ball_radius() const { return radius_; }
  const std::vector<ConvexSetSpec>& parts() const { return parts_; }

  Eigen::VectorXd project(const Eigen::VectorXd& w) const {
    check_dim(w);
    Eigen::VectorXd p = w;
    project_in_place(p);
    return p;
  }

  // In-place variant used by the hot solver loops.
  void project_in_place(Eigen::VectorXd& w) const {
    switch (kind_) {
      case Kind::Box:
        for (int i = 0; i < dim_; ++i) w[i] = std::clamp(w[i], lo_[i], hi_[i]);
        return;
      case Kind::Ball: {
        double nd = (w - center_).norm();
        if (nd > radius_) w = center_ + (w - center_) * (radius_ / nd);
        return;
      }
      case Kind::Simplex:
        project_simplex(w);
        return;
      case Kind::Product: {
        int off = 0;
        for (const auto& p : parts_) {
          Eigen::VectorXd seg = w.segment(off, p.dim());
          p.project_in_place(seg);
          w.segment(off, p.dim()) = seg;
          off += p.dim();
        }
        return;
      }
    }
  }

  double diameter() const {
    switch (kind_) {
      case Kind::Box:
        return (hi_ - lo_).norm();
      case Kind::Ball:
        return 2.0 * radius_;
      case Kind::Simplex:
        // Vertex-to-vertex distance; the 1-d simplex is the single point {1}.
        return dim_ >= 2 ? std::sqrt(2.0) : 0.0;
      case Kind::Product: {
        double sq = 0.0;
        for (const auto& p : parts_) {
          double d = p.diameter();
          sq += d * d;
        }
        return std::sqrt(sq);
      }
    }
    return 0.0;
  }

  double distance(const Eigen::VectorXd& x) const {
    return (x - project(x)).norm();
  }

  // Membership through the projection distance, so every variant exercises
  // the same code path.
  bool contains(const Eigen::VectorXd& x, double tol) const {
    if (tol < 0.0) throw InputError("contains: tol must be >= 0");
    return distance(x) <= tol;
  }

  // Membership in the enlargement X + delta * unit ball. For convex X,
  // dist(x, X + delta B) = max(0, dist(x, X) - delta).
  bool contains_enlarged(const Eigen::VectorXd& x, double delta,
                         double tol) const {
    return distance(x) <= delta + tol;
  }

 private:
  void check_dim(const Eigen::VectorXd& w) const {
    if (w.size() != dim_)
      throw InputError("set of dimension " + std::to_string(dim_) +
                       " queried with vector of dimension " +
                       std::to_string(w.size()));
  }

  // Sort-and-threshold projection onto the standard simplex. Components equal
  // to the threshold are included; the projection is unique so any consistent
  // tie rule yields the same point.
  static void project_simplex(Eigen::VectorXd& w) {
    const int n = static_cast<int>(w.size());
    std::vector<double> u(w.data(), w.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cum = 0.0;
    double tau = 0.0;
    for (int j = 0; j < n; ++j) {
      cum += u[j];
      double t = (cum - 1.0) / (j + 1);
      if (u[j] - t > 0.0) tau = t;
    }
    for (int i = 0; i < n; ++i) w[i] = std::max(0.0, w[i] - tau);
  }

  Kind kind_ = Kind::Box;
  int dim_ = 0;
  Eigen::VectorXd lo_, hi_;      // box
  Eigen::VectorXd center_;       // ball
  double radius_ = 0.0;          // ball
  std::vector<ConvexSetSpec> parts_;  // product
};

inline Eigen::VectorXd project(const ConvexSetSpec& set,
                               const Eigen::VectorXd& w) {
  return set.project(w);
}

inline double diameter(const ConvexSetSpec& set) { return set.diameter(); }

inline bool contains(const ConvexSetSpec& set, const Eigen::VectorXd& x,
                     double tol) {
  return set.contains(x, tol);
}

}  // namespace hiergame
