#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "hiergame/errors.hpp"
#include "hiergame/geometry.hpp"
#include "hiergame/lower_level.hpp"
#include "hiergame/rng.hpp"

namespace hiergame {

// Block vector x = (x_1, ..., x_N) with per-player blocks of dimension n_i.
struct StrategyProfile {
  std::vector<Eigen::VectorXd> blocks;

  int total_dim() const {
    int n = 0;
    for (const auto& b : blocks) n += static_cast<int>(b.size());
    return n;
  }

  Eigen::VectorXd flat() const {
    Eigen::VectorXd x(total_dim());
    int off = 0;
    for (const auto& b : blocks) {
      x.segment(off, b.size()) = b;
      off += static_cast<int>(b.size());
    }
    return x;
  }

  static StrategyProfile from_flat(const Eigen::VectorXd& x,
                                   const std::vector<int>& dims) {
    int n = 0;
    for (int d : dims) n += d;
    if (n != x.size()) throw InputError("StrategyProfile: dims do not match vector length");
    StrategyProfile p;
    p.blocks.reserve(dims.size());
    int off = 0;
    for (int d : dims) {
      p.blocks.push_back(x.segment(off, d));
      off += d;
    }
    return p;
  }

  bool operator==(const StrategyProfile& o) const { return blocks == o.blocks; }
};

// Stochastic oracle for the expectation-valued upper-level field V.
// affine_gaussian: V_hat(x, xi) = M x + q + xi with xi ~ N(0, sigma^2 I);
// finite_sum: uniform draw over affine components averaging to (M, q).
struct UpperLevelOracle {
  enum class Mode { AffineGaussian, FiniteSum };

  Mode mode = Mode::AffineGaussian;
  Eigen::MatrixXd M;
  Eigen::VectorXd q;
  double noise_scale = 0.0;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::VectorXd>> components;
  double lipschitz_bound = 0.0;  // L_f

  int dim() const { return static_cast<int>(q.size()); }

  Eigen::VectorXd mean(const Eigen::VectorXd& x) const {
    return M * x + q;
  }
};

// Leader-follower coupling g_i(x_i, y_i). L1 and L2 are Lipschitz constants
// of the implicit cost in x and of g in y on the enlarged set.
struct CouplingCost {
  enum class Kind { Bilinear, QuadraticInY };

  Kind kind = Kind::Bilinear;
  Eigen::MatrixXd A;  // bilinear: g = x^T A y
  Eigen::VectorXd c;  // quadratic_in_y: g = 0.5 ||y||^2 + c^T y

  double value(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    if (kind == Kind::Bilinear) return x.dot(A * y);
    return 0.5 * y.squaredNorm() + c.dot(y);
  }
};

// Exact quadratic representation 0.5 x^T Q x + c^T x + r of an implicit cost,
// available on benchmarks where the follower response is affine and interior.
struct QuadraticCost {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  double r = 0.0;

  double value(const Eigen::VectorXd& x) const {
    return 0.5 * x.dot(Q * x) + c.dot(x) + r;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const { return Q * x + c; }
};

struct GroundTruth {
  Eigen::VectorXd x_star;  // least-norm solution (the unique one when unique)
  bool unique = true;
  std::string solution_description;
};

// Audit counters; "one random variable" is one xi-draw or one W-draw per
// player, matching the oracle-complexity accounting 2KTN + 2N sum b_t.
struct OracleCounters {
  std::uint64_t xi_samples = 0;
  std::uint64_t w_samples = 0;
  std::uint64_t lower_level_solves = 0;
};

struct HierarchicalGame {
  std::string name;
  int num_players = 0;
  std::vector<int> dims;     // n_i
  std::vector<int> offsets;  // block offsets into the flat vector
  int n = 0;                 // total upper-level dimension

  std::vector<ConvexSetSpec> sets;  // X_i
  ConvexSetSpec joint_set;          // X = prod X_i
  UpperLevelOracle oracle;
  std::vector<LowerLevelVi> lower;
  std::vector<CouplingCost> costs;

  double delta0 = 0.25;
  std::vector<double> L_h;  // Lipschitz of h_i on X_{i,delta0}
  std::vector<double> L1;   // Lipschitz of x -> g_i(x, y_i(x)) on X_{i,delta0}
  std::vector<double> L2;   // Lipschitz of y -> g_i(x, y) over the visited range

  std::vector<QuadraticCost> analytic_h;  // empty when no exact form exists
  std::optional<GroundTruth> ground_truth;

  double sigma_xi() const { return oracle.noise_scale; }
  // Exact second-moment bound of the oracle noise for additive Gaussian noise.
  double M_V() const { return oracle.noise_scale * std::sqrt(double(n)); }

  Eigen::VectorXd block(const Eigen::VectorXd& x, int i) const {
    return x.segment(offsets[i], dims[i]);
  }

  void finalize() {
    num_players = static_cast<int>(dims.size());
    offsets.assign(num_players, 0);
    n = 0;
    for (int i = 0; i < num_players; ++i) {
      offsets[i] = n;
      n += dims[i];
    }
    joint_set = ConvexSetSpec::product(sets);
  }

  void check_in_enlarged(const Eigen::VectorXd& x, const char* who) const {
    if (x.size() != n) throw InputError(std::string(who) + ": dimension mismatch");
    if (!joint_set.contains_enlarged(x, delta0, 1e-9))
      throw DomainError(std::string(who) + ": point outside the enlarged set X_delta0");
  }
};

// ---------------------------------------------------------------------------
// Upper-level oracle queries
// ---------------------------------------------------------------------------

inline Eigen::VectorXd true_upper_gradient(const HierarchicalGame& game,
                                           const Eigen::VectorXd& x) {
  if (x.size() != game.n) throw InputError("true_upper_gradient: dimension mismatch");
  return game.oracle.mean(x);
}

inline Eigen::VectorXd sample_upper_gradient(const HierarchicalGame& game,
                                             const Eigen::VectorXd& x,
                                             std::mt19937_64& rng,
                                             OracleCounters& counters) {
  game.check_in_enlarged(x, "sample_upper_gradient");
  counters.xi_samples += game.num_players;
  const auto& o = game.oracle;
  if (o.mode == UpperLevelOracle::Mode::AffineGaussian) {
    Eigen::VectorXd v = o.mean(x);
    if (o.noise_scale > 0.0) v += o.noise_scale * gaussian_vector(rng, game.n);
    return v;
  }
  // finite sum: each player draws her own component index
  Eigen::VectorXd v(game.n);
  std::uniform_int_distribution<std::size_t> pick(0, o.components.size() - 1);
  for (int i = 0; i < game.num_players; ++i) {
    const auto& comp = o.components[pick(rng)];
    v.segment(game.offsets[i], game.dims[i]).noalias() =
        comp.first.middleRows(game.offsets[i], game.dims[i]) * x +
        comp.second.segment(game.offsets[i], game.dims[i]);
  }
  return v;
}

// One xi-draw per player, evaluated at two points. The shared draw is what
// makes the inner-loop correction difference cancel its noise.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> sample_upper_pair(
    const HierarchicalGame& game, const Eigen::VectorXd& u,
    const Eigen::VectorXd& v, std::mt19937_64& rng, OracleCounters& counters) {
  game.check_in_enlarged(u, "sample_upper_pair");
  game.check_in_enlarged(v, "sample_upper_pair");
  counters.xi_samples += game.num_players;
  const auto& o = game.oracle;
  if (o.mode == UpperLevelOracle::Mode::AffineGaussian) {
    Eigen::VectorXd vu = o.mean(u);
    Eigen::VectorXd vv = o.mean(v);
    if (o.noise_scale > 0.0) {
      Eigen::VectorXd xi = o.noise_scale * gaussian_vector(rng, game.n);
      vu += xi;
      vv += xi;
    }
    return {std::move(vu), std::move(vv)};
  }
  Eigen::VectorXd vu(game.n), vv(game.n);
  std::uniform_int_distribution<std::size_t> pick(0, o.components.size() - 1);
  for (int i = 0; i < game.num_players; ++i) {
    const auto& comp = o.components[pick(rng)];
    auto rows = comp.first.middleRows(game.offsets[i], game.dims[i]);
    auto qseg = comp.second.segment(game.offsets[i], game.dims[i]);
    vu.segment(game.offsets[i], game.dims[i]).noalias() = rows * u + qseg;
    vv.segment(game.offsets[i], game.dims[i]).noalias() = rows * v + qseg;
  }
  return {std::move(vu), std::move(vv)};
}

inline Eigen::VectorXd minibatch_V(const HierarchicalGame& game,
                                   const Eigen::VectorXd& x, long b,
                                   std::mt19937_64& rng,
                                   OracleCounters& counters) {
  if (b < 1) throw InputError("minibatch_V: batch size must be >= 1");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(game.n);
  for (long s = 0; s < b; ++s) acc += sample_upper_gradient(game, x, rng, counters);
  return acc / double(b);
}

// ---------------------------------------------------------------------------
// Implicit cost h_i and its inexact counterpart
// ---------------------------------------------------------------------------

// The stored Lipschitz certificates (L_h, L1, L2) hold on X_{i,delta0};
// benchmark followers are solvable for any x_i, so no domain guard is raised
// here. Late inner iterates may sit a hair outside X because the full Tseng
// step is unprojected.
inline double implicit_cost(const HierarchicalGame& game, int i,
                            const Eigen::VectorXd& x_i, double tol = 1e-11,
                            OracleCounters* counters = nullptr) {
  if (i < 0 || i >= game.num_players) throw InputError("implicit_cost: bad player index");
  ViSolverConfig cfg;
  cfg.tol = tol;
  Eigen::VectorXd y = solve_vi_exact(game.lower[i], x_i, cfg);
  if (counters) counters->lower_level_solves += 1;
  return game.costs[i].value(x_i, y);
}

inline double implicit_cost_inexact(const HierarchicalGame& game, int i,
                                    const Eigen::VectorXd& x_i, double eps,
                                    OracleCounters* counters = nullptr) {
  if (!(eps > 0.0)) throw InputError("implicit_cost_inexact: eps must be > 0");
  if (i < 0 || i >= game.num_players)
    throw InputError("implicit_cost_inexact: bad player index");
  Eigen::VectorXd y = solve_vi_inexact(game.lower[i], x_i, eps);
  if (counters) counters->lower_level_solves += 1;
  return game.costs[i].value(x_i, y);
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

struct BenchmarkOverrides {
  std::optional<double> noise_scale;
  std::optional<int> block_dim;          // hier-chain only
  std::optional<std::string> oracle_mode;  // "affine_gaussian" | "finite_sum"
};

namespace detail {

inline double spectral_norm(const Eigen::MatrixXd& M) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  return svd.singularValues()(0);
}

inline double min_sym_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  return es.eigenvalues().minCoeff();
}

// Maximum of the convex map x -> ||G x + g0|| over the box lo <= x <= hi,
// attained at a vertex; exact by corner enumeration (block dims stay small).
inline double max_affine_norm_over_box(const Eigen::MatrixXd& G,
                                       const Eigen::VectorXd& g0,
                                       const Eigen::VectorXd& lo,
                                       const Eigen::VectorXd& hi) {
  const int m = static_cast<int>(lo.size());
  if (m > 20) throw InputError("corner enumeration limited to dimension 20");
  double best = 0.0;
  Eigen::VectorXd x(m);
  for (std::uint64_t mask = 0; mask < (1ULL << m); ++mask) {
    for (int j = 0; j < m; ++j) x[j] = (mask >> j) & 1 ? hi[j] : lo[j];
    best = std::max(best, (G * x + g0).norm());
  }
  return best;
}

inline void install_finite_sum_mode(HierarchicalGame& game) {
  // Two affine components averaging to (M, q); the antisymmetric tilt keeps
  // both symmetric parts PSD.
  auto& o = game.oracle;
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(game.n, game.n);
  for (int i = 0; i + 1 < game.n; i += 2) {
    E(i, i + 1) = 1.0;
    E(i + 1, i) = -1.0;
  }
  Eigen::VectorXd dq(game.n);
  for (int i = 0; i < game.n; ++i) dq[i] = (i % 2 == 0) ? 0.5 : -0.5;
  o.components = {{o.M + E, o.q + dq}, {o.M - E, o.q - dq}};
  o.mode = UpperLevelOracle::Mode::FiniteSum;
  o.noise_scale = 0.0;
  double lf = 0.0;
  for (const auto& comp : o.components) lf = std::max(lf, spectral_norm(comp.first));
  o.lipschitz_bound = lf;
}

inline HierarchicalGame make_quad_duopoly() {
  HierarchicalGame g;
  g.name = "quad-duopoly";
  g.dims = {1, 1};
  Eigen::VectorXd lo1(1), hi1(1);
  lo1 << -1.0;
  hi1 << 1.0;
  g.sets = {ConvexSetSpec::box(lo1, hi1), ConvexSetSpec::box(lo1, hi1)};

  g.oracle.M.resize(2, 2);
  g.oracle.M << 2.0, 1.0, 1.0, 2.0;
  g.oracle.q.resize(2);
  g.oracle.q << -1.0, -1.0;
  g.oracle.noise_scale = 0.5;
  g.oracle.lipschitz_bound = spectral_norm(g.oracle.M);

  Eigen::VectorXd ylo(1), yhi(1);
  ylo << -2.0;
  yhi << 2.0;
  for (int i = 0; i < 2; ++i) {
    LowerLevelVi vi;
    vi.B = Eigen::MatrixXd::Identity(1, 1);
    vi.d = Eigen::VectorXd::Zero(1);
    vi.P = Eigen::MatrixXd::Identity(1, 1);
    vi.set = ConvexSetSpec::box(ylo, yhi);
    vi.mu = 1.0;
    vi.lipschitz = 1.0;
    g.lower.push_back(vi);

    CouplingCost cost;
    cost.kind = CouplingCost::Kind::Bilinear;
    cost.A = Eigen::MatrixXd::Identity(1, 1);
    g.costs.push_back(cost);
  }
  // y_i(x_i) = x_i stays interior on X_{i,delta0}, so h_i(x_i) = x_i^2.
  for (int i = 0; i < 2; ++i) {
    QuadraticCost h;
    h.Q = 2.0 * Eigen::MatrixXd::Identity(1, 1);
    h.c = Eigen::VectorXd::Zero(1);
    h.r = 0.0;
    g.analytic_h.push_back(h);
    double reach = 1.0 + g.delta0;
    g.L_h.push_back(2.0 * reach);  // sup |h'| = 2|x| on [-1.25, 1.25]
    g.L1.push_back(2.0 * reach);
    g.L2.push_back(reach);  // |d g / d y| = |x_i|
  }
  GroundTruth gt;
  gt.x_star.resize(2);
  gt.x_star << 0.2, 0.2;  // (M + 2I) x = -q, interior
  gt.unique = true;
  gt.solution_description = "unique interior equilibrium of (M + 2I) x = -q";
  g.ground_truth = gt;
  g.finalize();
  return g;
}

inline HierarchicalGame make_nonunique_line() {
  HierarchicalGame g;
  g.name = "nonunique-line";
  g.dims = {1, 1};
  Eigen::VectorXd lo1 = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd hi1 = Eigen::VectorXd::Ones(1);
  g.sets = {ConvexSetSpec::box(lo1, hi1), ConvexSetSpec::box(lo1, hi1)};

  g.oracle.M.resize(2, 2);
  g.oracle.M << 1.0, 1.0, 1.0, 1.0;
  g.oracle.q.resize(2);
  g.oracle.q << -1.0, -1.0;
  g.oracle.noise_scale = 0.5;
  g.oracle.lipschitz_bound = spectral_norm(g.oracle.M);

  Eigen::VectorXd ylo(1), yhi(1);
  ylo << -1.0;
  yhi << 1.0;
  for (int i = 0; i < 2; ++i) {
    LowerLevelVi vi;  // phi = y: follower response is identically 0
    vi.B = Eigen::MatrixXd::Identity(1, 1);
    vi.d = Eigen::VectorXd::Zero(1);
    vi.P = Eigen::MatrixXd::Zero(1, 1);
    vi.set = ConvexSetSpec::box(ylo, yhi);
    vi.mu = 1.0;
    vi.lipschitz = 1.0;
    g.lower.push_back(vi);

    CouplingCost cost;  // g identically 0, so h identically 0
    cost.kind = CouplingCost::Kind::Bilinear;
    cost.A = Eigen::MatrixXd::Zero(1, 1);
    g.costs.push_back(cost);

    QuadraticCost h;
    h.Q = Eigen::MatrixXd::Zero(1, 1);
    h.c = Eigen::VectorXd::Zero(1);
    g.analytic_h.push_back(h);
    g.L_h.push_back(0.0);
    g.L1.push_back(0.0);
    g.L2.push_back(0.0);
  }
  GroundTruth gt;
  gt.x_star.resize(2);
  gt.x_star << 0.5, 0.5;
  gt.unique = false;
  gt.solution_description =
      "solution set {x1 + x2 = 1} in [0,1]^2; Tikhonov path s(eta) = (1/(2+eta)) (1,1)";
  g.ground_truth = gt;
  g.finalize();
  return g;
}

inline HierarchicalGame make_hier_chain(int m) {
  if (m < 1 || m > 8) throw InputError("hier-chain: block_dim must be in [1, 8]");
  HierarchicalGame g;
  g.name = "hier-chain";
  g.dims = {m, m};
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(m, -1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(m, 1.0);
  g.sets = {ConvexSetSpec::box(lo, hi), ConvexSetSpec::box(lo, hi)};
  const int n = 2 * m;

  // Monotone nonsymmetric upper-level field: M = 2 I + antisymmetric chain.
  Eigen::MatrixXd M = 2.0 * Eigen::MatrixXd::Identity(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    double a = (i % 2 == 0) ? 1.0 : 0.5;
    M(i, i + 1) += a;
    M(i + 1, i) -= a;
  }
  Eigen::VectorXd q(n);
  const double qpat[4] = {-1.0, 0.5, -0.5, 1.0};
  for (int i = 0; i < n; ++i) q[i] = 0.8 * qpat[i % 4];
  g.oracle.M = M;
  g.oracle.q = q;
  g.oracle.noise_scale = 0.5;
  g.oracle.lipschitz_bound = spectral_norm(M);

  // SPD chain matrix for the follower map phi(x, y) = B y - d - x.
  Eigen::MatrixXd B = 2.0 * Eigen::MatrixXd::Identity(m, m);
  for (int i = 0; i + 1 < m; ++i) {
    B(i, i + 1) = 0.5;
    B(i + 1, i) = 0.5;
  }
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i) d[i] = (i % 2 == 0) ? 0.5 : -0.25;
  Eigen::MatrixXd Binv = B.inverse();

  Eigen::VectorXd ylo = Eigen::VectorXd::Constant(m, -5.0);
  Eigen::VectorXd yhi = Eigen::VectorXd::Constant(m, 5.0);
  Eigen::VectorXd elo = Eigen::VectorXd::Constant(m, -1.0 - g.delta0);
  Eigen::VectorXd ehi = Eigen::VectorXd::Constant(m, 1.0 + g.delta0);
  for (int i = 0; i < 2; ++i) {
    LowerLevelVi vi;
    vi.B = B;
    vi.d = d;
    vi.P = Eigen::MatrixXd::Identity(m, m);
    vi.set = ConvexSetSpec::box(ylo, yhi);
    vi.mu = min_sym_eigenvalue(B);
    vi.lipschitz = spectral_norm(B);
    g.lower.push_back(vi);

    CouplingCost cost;  // g = 0.5 ||y||^2, so h_i(x) = 0.5 ||B^{-1}(d + x)||^2
    cost.kind = CouplingCost::Kind::QuadraticInY;
    cost.c = Eigen::VectorXd::Zero(m);
    g.costs.push_back(cost);

    QuadraticCost h;
    h.Q = Binv.transpose() * Binv;
    h.c = Binv.transpose() * (Binv * d);
    h.r = 0.5 * (Binv * d).squaredNorm();
    g.analytic_h.push_back(h);
    g.L_h.push_back(max_affine_norm_over_box(h.Q, h.c, elo, ehi));
    g.L1.push_back(g.L_h.back());
    // ||grad_y g|| = ||y|| over the response range y = B^{-1}(d + x).
    g.L2.push_back(max_affine_norm_over_box(Binv, Binv * d, elo, ehi));
  }

  // Follower responses must stay interior on the enlarged box so the
  // quadratic form of h is exact.
  double y_reach = max_affine_norm_over_box(Binv, Binv * d, elo, ehi);
  if (y_reach >= 5.0 - 1e-9)
    throw ConfigError("hier-chain: follower response leaves the interior of Y");

  // Unique equilibrium of the assembled affine MVI; interior by construction.
  Eigen::MatrixXd Qh = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd ch = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < 2; ++i) {
    Qh.block(i * m, i * m, m, m) = g.analytic_h[i].Q;
    ch.segment(i * m, m) = g.analytic_h[i].c;
  }
  Eigen::VectorXd x_star = (M + Qh).partialPivLu().solve(-(q + ch));
  if (x_star.cwiseAbs().maxCoeff() >= 0.95)
    throw ConfigError("hier-chain: equilibrium not safely interior; adjust q");
  GroundTruth gt;
  gt.x_star = x_star;
  gt.unique = true;
  gt.solution_description = "unique interior equilibrium of (M + Q_h) x = -(q + c_h)";
  g.ground_truth = gt;
  g.finalize();
  return g;
}

}  // namespace detail

inline HierarchicalGame make_benchmark(const std::string& name,
                                       const BenchmarkOverrides& over = {}) {
  HierarchicalGame g;
  if (name == "quad-duopoly") {
    if (over.block_dim) throw InputError("quad-duopoly: block_dim override unsupported");
    g = detail::make_quad_duopoly();
  } else if (name == "nonunique-line") {
    if (over.block_dim) throw InputError("nonunique-line: block_dim override unsupported");
    g = detail::make_nonunique_line();
  } else if (name == "hier-chain") {
    g = detail::make_hier_chain(over.block_dim.value_or(2));
  } else {
    throw InputError("unknown benchmark '" + name + "'");
  }
  if (over.noise_scale) {
    if (*over.noise_scale < 0.0) throw InputError("noise_scale must be >= 0");
    g.oracle.noise_scale = *over.noise_scale;
  }
  if (over.oracle_mode) {
    if (*over.oracle_mode == "finite_sum") {
      detail::install_finite_sum_mode(g);
    } else if (*over.oracle_mode != "affine_gaussian") {
      throw InputError("oracle_mode must be affine_gaussian or finite_sum");
    }
  }
  return g;
}

}  // namespace hiergame
