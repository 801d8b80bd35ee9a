#pragma once

// Identifiability machinery: submodule affinities, support functions and
// in-radius estimates of the polar bodies P° and P°_ssc, the C1/C2 bound
// formulas, the pairwise sufficient condition, the Monte Carlo check of the
// main concentration bound, and the empirical in-radius-vs-group-order probe.

#include "ssmc/group.hpp"
#include "ssmc/random.hpp"
#include "ssmc/solver.hpp"
#include "ssmc/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace ssmc {

struct BoundParams {
  double t = 1.0;
  double Delta = 1.0;

  void validate() const {
    if (!(t > 0.0) || !(Delta > 0.0))
      throw std::invalid_argument("BoundParams: t and Delta must be positive");
  }
};

// ---------------------------------------------------------------------------
// affinities
// ---------------------------------------------------------------------------

/// sqrt( sum_g ||Qk^T L_g^T Ql||_F^2 ) — total coherence of two submodules
/// under the group action. Never smaller than the plain subspace affinity.
inline double submodule_affinity(const SubmoduleBasis& Qk, const SubmoduleBasis& Ql,
                                 const GroupRepresentation& rep) {
  if (Qk.n() != rep.n() || Ql.n() != rep.n())
    throw std::invalid_argument("submodule_affinity: dimension mismatch");
  double sum = 0.0;
  for (Index g = 0; g < rep.order(); ++g)
    sum += (Qk.Q.transpose() * rep.apply_transpose(g, Ql.Q)).squaredNorm();
  return std::sqrt(sum);
}

/// ||Qk^T Ql||_F — the submodules treated as plain subspaces.
inline double subspace_affinity(const SubmoduleBasis& Qk, const SubmoduleBasis& Ql) {
  if (Qk.n() != Ql.n()) throw std::invalid_argument("subspace_affinity: dimension mismatch");
  return (Qk.Q.transpose() * Ql.Q).norm();
}

// ---------------------------------------------------------------------------
// reduced-coordinate dictionaries
// ---------------------------------------------------------------------------

/// [rho(1) A, rho(2) A, ..., rho(N_G) A] with rho(g) = Q^T L_g Q the action
/// induced on the submodule; this is the dictionary Q^T [L_g X] of points
/// X = Q A written in reduced coordinates (d x K*N_G).
inline Eigen::MatrixXd reduced_group_dictionary(const SubmoduleBasis& basis,
                                                const Eigen::MatrixXd& A) {
  if (A.rows() != basis.dim())
    throw std::invalid_argument("reduced_group_dictionary: coefficients must be d x K");
  const Index d = basis.dim();
  const Index K = A.cols();
  const Index N_G = basis.rep.order();
  Eigen::MatrixXd out(d, K * N_G);
  for (Index g = 0; g < N_G; ++g) {
    const Eigen::MatrixXd rho_g = basis.Q.transpose() * basis.rep.apply(g, basis.Q);
    out.middleCols(g * K, K) = rho_g * A;
  }
  return out;
}

// ---------------------------------------------------------------------------
// polar-body support functions and in-radius estimation
// ---------------------------------------------------------------------------

/// Support function of P° = { A b : ||reshape(b)||_{1,2} <= 1 } at a unit
/// direction u: the maximum of u^T A b over the group-norm ball is attained
/// block-row-wise, giving ||reshape(A^T u)||_{inf,2}.
inline double support_function_P_polar(const Eigen::MatrixXd& A_G, Index K, Index N_G,
                                       const Eigen::VectorXd& u) {
  if (std::abs(u.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("support_function_P_polar: u must be a unit vector");
  return norm_inf_2(reshape_group(A_G.transpose() * u, K, N_G));
}

/// Support function of P°_ssc = { A_1 b : ||b||_1 <= 1 } built from the
/// identity block alone: ||A_1^T u||_inf.
inline double support_function_P_polar_ssc(const Eigen::MatrixXd& A_G, Index K,
                                           const Eigen::VectorXd& u) {
  if (std::abs(u.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("support_function_P_polar_ssc: u must be a unit vector");
  return (A_G.leftCols(K).transpose() * u).cwiseAbs().maxCoeff();
}

struct InradiusOptions {
  int num_directions = 2000;  // uniform sphere samples
  int descent_steps = 100;    // projected subgradient steps per refined start
  int refine_count = 10;      // number of smallest samples refined
  std::uint64_t seed = 0;
};

struct InradiusEstimate {
  double r_hat = 0.0;            // min of the support function over the evaluated set;
                                 // an upper bound on the true in-radius
  double R_hat = 0.0;            // 1 / r_hat, circumradius of the polar body
  Eigen::VectorXd direction;     // direction achieving r_hat
};

namespace detail {

// h(u) and a subgradient for the group body.
inline double group_support_grad(const Eigen::MatrixXd& A, Index K, Index N_G,
                                 const Eigen::VectorXd& u, Eigen::VectorXd& grad) {
  const GroupMatrix R = reshape_group(A.transpose() * u, K, N_G);
  Index imax = 0;
  const double h = R.rowwise().norm().maxCoeff(&imax);
  grad.setZero(u.size());
  if (h > 0.0)
    for (Index g = 0; g < N_G; ++g) grad += A.col(g * K + imax) * (R(imax, g) / h);
  return h;
}

// h(u) and a subgradient for the SSC body (identity block, l1 ball).
inline double ssc_support_grad(const Eigen::MatrixXd& A, Index K, const Eigen::VectorXd& u,
                               Eigen::VectorXd& grad) {
  const Eigen::VectorXd w = A.leftCols(K).transpose() * u;
  Index imax = 0;
  const double h = w.cwiseAbs().maxCoeff(&imax);
  grad = A.col(imax) * (w(imax) >= 0.0 ? 1.0 : -1.0);
  return h;
}

// Projected subgradient descent on the sphere with geometric step decay;
// updates (best, best_dir) with every evaluation along the way.
template <typename HGrad>
void refine_direction(HGrad&& h_grad, Eigen::VectorXd u, int steps, double& best,
                      Eigen::VectorXd& best_dir) {
  Eigen::VectorXd grad(u.size());
  const double step0 = 0.2, step_end = 1e-9;
  const double decay = steps > 1 ? std::pow(step_end / step0, 1.0 / (steps - 1)) : 1.0;
  double step = step0;
  for (int t = 0; t < steps; ++t, step *= decay) {
    const double h = h_grad(u, grad);
    if (h < best) {
      best = h;
      best_dir = u;
    }
    const double gn = grad.norm();
    if (gn == 0.0) break;
    u -= (step / gn) * grad;
    const double un = u.norm();
    if (un == 0.0) break;
    u /= un;
  }
}

}  // namespace detail

/// In-radius of the origin-symmetric body P°: min over unit u of the support
/// function. Samples num_directions uniform directions, refines the
/// refine_count smallest by projected subgradient descent, and returns the
/// smallest value seen — an upper bound on the true in-radius, since the
/// minimum runs over a finite direction set. R_hat = 1/r_hat by the polar
/// inverse relation.
inline InradiusEstimate estimate_inradius(const Eigen::MatrixXd& A_G, Index K, Index N_G,
                                          const InradiusOptions& opts = {}) {
  if (A_G.size() == 0 || A_G.norm() == 0.0)
    throw std::invalid_argument("estimate_inradius: zero dictionary");
  if (A_G.cols() != K * N_G) throw std::invalid_argument("estimate_inradius: layout mismatch");
  const Index d = A_G.rows();
  Rng rng = make_rng(opts.seed);

  auto hg = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    return detail::group_support_grad(A_G, K, N_G, u, g);
  };

  std::vector<std::pair<double, Eigen::VectorXd>> samples;
  samples.reserve(static_cast<size_t>(opts.num_directions));
  Eigen::VectorXd gtmp(d);
  for (int s = 0; s < opts.num_directions; ++s) {
    Eigen::VectorXd u = unit_sphere_vector(d, rng);
    samples.emplace_back(hg(u, gtmp), std::move(u));
  }
  const int m = std::min<int>(opts.refine_count, opts.num_directions);
  std::partial_sort(samples.begin(), samples.begin() + m, samples.end(),
                    [](const auto& a, const auto& b) { return a.first < b.first; });

  double best = samples.front().first;
  Eigen::VectorXd best_dir = samples.front().second;
  for (int s = 0; s < m; ++s)
    detail::refine_direction(hg, samples[static_cast<size_t>(s)].second, opts.descent_steps,
                             best, best_dir);

  InradiusEstimate est;
  est.r_hat = best;
  est.R_hat = 1.0 / best;
  est.direction = best_dir;
  return est;
}

struct PairedInradius {
  InradiusEstimate group;  // body P°
  InradiusEstimate ssc;    // body P°_ssc
};

/// Joint estimate of r(P°) and r(P°_ssc) on a shared direction sample, with
/// the SSC support function additionally evaluated at the group argmin. Since
/// the group row norm dominates the absolute identity-block entry pointwise,
/// this guarantees ssc.r_hat <= group.r_hat on the evaluated set.
inline PairedInradius estimate_inradius_pair(const Eigen::MatrixXd& A_G, Index K, Index N_G,
                                             const InradiusOptions& opts = {}) {
  if (A_G.size() == 0 || A_G.norm() == 0.0)
    throw std::invalid_argument("estimate_inradius_pair: zero dictionary");
  if (A_G.cols() != K * N_G)
    throw std::invalid_argument("estimate_inradius_pair: layout mismatch");
  const Index d = A_G.rows();
  Rng rng = make_rng(opts.seed);

  auto hg = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    return detail::group_support_grad(A_G, K, N_G, u, g);
  };
  auto hs = [&](const Eigen::VectorXd& u, Eigen::VectorXd& g) {
    return detail::ssc_support_grad(A_G, K, u, g);
  };

  std::vector<std::pair<double, Eigen::VectorXd>> gs, ss;
  gs.reserve(static_cast<size_t>(opts.num_directions));
  ss.reserve(static_cast<size_t>(opts.num_directions));
  Eigen::VectorXd gtmp(d);
  for (int s = 0; s < opts.num_directions; ++s) {
    const Eigen::VectorXd u = unit_sphere_vector(d, rng);
    gs.emplace_back(hg(u, gtmp), u);
    ss.emplace_back(hs(u, gtmp), u);
  }
  const int m = std::min<int>(opts.refine_count, opts.num_directions);
  auto by_value = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::partial_sort(gs.begin(), gs.begin() + m, gs.end(), by_value);
  std::partial_sort(ss.begin(), ss.begin() + m, ss.end(), by_value);

  PairedInradius pair;
  pair.group.r_hat = gs.front().first;
  pair.group.direction = gs.front().second;
  pair.ssc.r_hat = ss.front().first;
  pair.ssc.direction = ss.front().second;
  for (int s = 0; s < m; ++s) {
    detail::refine_direction(hg, gs[static_cast<size_t>(s)].second, opts.descent_steps,
                             pair.group.r_hat, pair.group.direction);
    detail::refine_direction(hs, ss[static_cast<size_t>(s)].second, opts.descent_steps,
                             pair.ssc.r_hat, pair.ssc.direction);
  }
  // dominance closure: the SSC body evaluated at the group argmin
  const double h_cross = hs(pair.group.direction, gtmp);
  if (h_cross < pair.ssc.r_hat) {
    pair.ssc.r_hat = h_cross;
    pair.ssc.direction = pair.group.direction;
  }
  pair.group.R_hat = 1.0 / pair.group.r_hat;
  pair.ssc.R_hat = 1.0 / pair.ssc.r_hat;
  return pair;
}

// ---------------------------------------------------------------------------
// bound formulas
// ---------------------------------------------------------------------------

/// C1(t, Delta) = 4 (log(N_k + 1) + log Delta + t)
inline double evaluate_C1(const BoundParams& p, Index N_k) {
  p.validate();
  if (N_k < 1) throw std::invalid_argument("evaluate_C1: N_k >= 1");
  return 4.0 * (std::log(static_cast<double>(N_k) + 1.0) + std::log(p.Delta) + p.t);
}

/// C2(t, Delta) = 4 N_G / ((N_k + 1) Delta^2) * exp(-2 t)
inline double evaluate_C2(const BoundParams& p, Index N_k, Index N_G) {
  p.validate();
  if (N_k < 1) throw std::invalid_argument("evaluate_C2: N_k >= 1");
  if (N_G < 1) throw std::invalid_argument("evaluate_C2: N_G >= 1");
  return 4.0 * static_cast<double>(N_G) /
         ((static_cast<double>(N_k) + 1.0) * p.Delta * p.Delta) * std::exp(-2.0 * p.t);
}

/// c0 * sqrt(log(N_l / d_l) / d_l); only defined for N_l > d_l.
inline double ssc_inradius_lower_bound(Index N_ell, Index d_ell, double c0) {
  if (d_ell < 1 || N_ell <= d_ell)
    throw std::invalid_argument("ssc_inradius_lower_bound: need N_l > d_l >= 1");
  if (!(c0 > 0.0)) throw std::invalid_argument("ssc_inradius_lower_bound: c0 > 0");
  return c0 * std::sqrt(std::log(static_cast<double>(N_ell) / static_cast<double>(d_ell)) /
                        static_cast<double>(d_ell));
}

// ---------------------------------------------------------------------------
// pairwise sufficient condition
// ---------------------------------------------------------------------------

struct PairwiseConditionResult {
  double lhs = 0.0;       // C1 * affinity / (sqrt(d_l) sqrt(d_k))
  double rhs = 0.0;       // estimated in-radius of P°
  double margin = 0.0;    // rhs - lhs
  bool holds = false;
  double c1 = 0.0;
  double affinity = 0.0;
};

/// Pairwise identification condition for ordering (k separated from l). The
/// in-radius side is the finite-sample estimate, an upper bound on the true
/// r(P°), so `holds` is optimistic.
inline PairwiseConditionResult check_pairwise_condition(
    const SubmoduleBasis& Qk, const SubmoduleBasis& Ql, const GroupRepresentation& rep,
    const Eigen::MatrixXd& A_G_ell, Index K_ell, const BoundParams& params, Index N_k,
    const InradiusOptions& iopts = {}) {
  PairwiseConditionResult res;
  res.c1 = evaluate_C1(params, N_k);
  res.affinity = submodule_affinity(Qk, Ql, rep);
  res.lhs = res.c1 * res.affinity /
            (std::sqrt(static_cast<double>(Ql.dim())) * std::sqrt(static_cast<double>(Qk.dim())));
  res.rhs = estimate_inradius(A_G_ell, K_ell, rep.order(), iopts).r_hat;
  res.margin = res.rhs - res.lhs;
  res.holds = res.lhs <= res.rhs;
  return res;
}

// ---------------------------------------------------------------------------
// xi vectors and the concentration-bound Monte Carlo
// ---------------------------------------------------------------------------

/// xi_g = a^T Qk^T L_g^T v for all g; ||xi||_2 is the quantity the main bound
/// controls. v is a unit group-dual direction in ambient coordinates.
inline Eigen::VectorXd evaluate_xi(const Eigen::VectorXd& a, const SubmoduleBasis& Qk,
                                   const GroupRepresentation& rep, const Eigen::VectorXd& v) {
  if (a.size() != Qk.dim() || v.size() != Qk.n())
    throw std::invalid_argument("evaluate_xi: dimension mismatch");
  const Eigen::VectorXd x = Qk.Q * a;
  Eigen::VectorXd xi(rep.order());
  for (Index g = 0; g < rep.order(); ++g) xi(g) = x.dot(rep.apply_transpose(g, v));
  return xi;
}

enum class DualSource {
  sampled,  // draw dual directions uniformly on the sphere (the distribution
            // the uniformity lemma gives them)
  solved    // solve a fresh dual program per trial and normalize its solution
};

struct TheoremOptions {
  int trials = 10000;
  std::uint64_t seed = 0;
  DualSource dual_source = DualSource::sampled;
  Index solved_points = 12;       // N_l of the per-trial instance in solved mode
  SolverConfig solver;            // dual solver settings for solved mode
};

struct TheoremFrequency {
  double frequency = 0.0;      // empirical P{ max_j ||xi_j|| <= threshold }
  double threshold = 0.0;      // C1 * affinity / (sqrt(d_k) sqrt(d_l))
  double c1 = 0.0;
  double c2 = 0.0;
  double bound_printed = 0.0;  // 1 - C2 e^{-2t}, the inequality as printed
  double bound_single = 0.0;   // 1 - C2, reading the e^{-2t} factor once
  int trials = 0;
};

/// Monte Carlo estimate of the probability that all N_k points of submodule k
/// stay below the C1 threshold against a dual direction of submodule l. In
/// sampled mode dual directions are drawn uniformly on S^{d_l - 1}; solved
/// mode generates a fresh semi-random instance per trial and solves its dual
/// program, which is distributionally identical but far more expensive.
inline TheoremFrequency theorem_event_frequency(const SubmoduleBasis& Qk,
                                                const SubmoduleBasis& Ql,
                                                const GroupRepresentation& rep,
                                                const BoundParams& params, Index N_k,
                                                const TheoremOptions& opts = {}) {
  if (opts.trials < 1) throw std::invalid_argument("theorem_event_frequency: trials >= 1");
  if (N_k < 1) throw std::invalid_argument("theorem_event_frequency: N_k >= 1");
  const Index d_k = Qk.dim();
  const Index d_l = Ql.dim();
  const Index N_G = rep.order();

  TheoremFrequency out;
  out.c1 = evaluate_C1(params, N_k);
  out.c2 = evaluate_C2(params, N_k, N_G);
  out.threshold = out.c1 * submodule_affinity(Qk, Ql, rep) /
                  (std::sqrt(static_cast<double>(d_k)) * std::sqrt(static_cast<double>(d_l)));
  out.bound_printed = 1.0 - out.c2 * std::exp(-2.0 * params.t);
  out.bound_single = 1.0 - out.c2;
  out.trials = opts.trials;

  // B_g = Qk^T L_g^T Ql, so xi_{j,g} = a_j^T B_g lambda_hat
  std::vector<Eigen::MatrixXd> B(static_cast<size_t>(N_G));
  for (Index g = 0; g < N_G; ++g)
    B[static_cast<size_t>(g)] = Qk.Q.transpose() * rep.apply_transpose(g, Ql.Q);

  Rng rng = make_rng(opts.seed);
  int hits = 0;
  for (int trial = 0; trial < opts.trials; ++trial) {
    Eigen::VectorXd lam_hat;
    if (opts.dual_source == DualSource::sampled) {
      lam_hat = unit_sphere_vector(d_l, rng);
    } else {
      // fresh instance on submodule l; dual of the program for its first point
      if (Ql.rep.order() != N_G)
        throw std::invalid_argument(
            "theorem_event_frequency: solved mode needs Ql built on the same group");
      const Index N_l = std::max<Index>(opts.solved_points, 2);
      Eigen::MatrixXd A(d_l, N_l);
      for (Index j = 0; j < N_l; ++j) A.col(j) = unit_sphere_vector(d_l, rng);
      const Eigen::MatrixXd dict = reduced_group_dictionary(Ql, A.rightCols(N_l - 1));
      const DualResult dual = solve_dual(A.col(0), dict, N_l - 1, N_G, opts.solver);
      const double nl = dual.lambda.norm();
      if (nl == 0.0) continue;
      lam_hat = dual.lambda / nl;
    }
    Eigen::MatrixXd T(d_k, N_G);
    for (Index g = 0; g < N_G; ++g) T.col(g) = B[static_cast<size_t>(g)] * lam_hat;
    double worst = 0.0;
    for (Index j = 0; j < N_k; ++j) {
      const Eigen::VectorXd a = unit_sphere_vector(d_k, rng);
      worst = std::max(worst, (T.transpose() * a).norm());
    }
    if (worst <= out.threshold) ++hits;
  }
  out.frequency = static_cast<double>(hits) / static_cast<double>(opts.trials);
  return out;
}

// ---------------------------------------------------------------------------
// conjecture probe
// ---------------------------------------------------------------------------

struct ConjectureRow {
  Index N_G = 0;
  int trial = 0;
  double r_hat = 0.0;
  double r_hat_ssc = 0.0;
  Index N = 0;
  Index d = 0;
};

struct ConjectureFit {
  double slope = std::numeric_limits<double>::quiet_NaN();   // LS fit of
                                                             // log r - log r_ssc vs log N_G
  double c0_hat = std::numeric_limits<double>::quiet_NaN();  // constant of the conjectured
                                                             // form r = c0 sqrt(N_G) sqrt(log(N/d)/d)
  std::vector<ConjectureRow> rows;
};

struct ConjectureOptions {
  std::vector<Index> ng_values{1, 2, 4, 8};
  Index beta = 2;        // d = beta * N_G, beta > 1 per the conjecture hypothesis
  Index n_over_d = 8;    // points per dimension
  int trials = 5;
  std::uint64_t seed = 0;
  InradiusOptions inradius;
};

/// Empirical probe of the conjectured sqrt(N_G) in-radius gain. For every
/// group order: build a cyclic shift representation, construct a free
/// submodule of dimension beta*N_G, sample a semi-random coefficient matrix,
/// and estimate the in-radii of P° and P°_ssc on shared directions. Reports
/// the fitted exponent and constant; this is evidence, not a proof.
inline ConjectureFit conjecture_probe(const ConjectureOptions& opts) {
  if (opts.beta < 2) throw std::invalid_argument("conjecture_probe: beta > 1 required");
  if (opts.n_over_d < 2) throw std::invalid_argument("conjecture_probe: need N > d");
  if (opts.trials < 1) throw std::invalid_argument("conjecture_probe: trials >= 1");
  ConjectureFit fit;
  for (size_t vi = 0; vi < opts.ng_values.size(); ++vi) {
    const Index N_G = opts.ng_values[vi];
    if (N_G < 1) throw std::invalid_argument("conjecture_probe: N_G >= 1");
    const GroupRepresentation rep = GroupRepresentation::cyclic_shift(opts.beta + 1, N_G);

    // free-orbit precheck: the orbit matrix of a random vector has rank N_G
    {
      Rng rng = make_rng(derive_seed(opts.seed, 1000 + static_cast<std::uint64_t>(vi)));
      const Eigen::VectorXd a = gaussian_vector(rep.n(), rng);
      Eigen::MatrixXd orbit(rep.n(), N_G);
      for (Index g = 0; g < N_G; ++g) orbit.col(g) = rep.apply(g, a);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(orbit);
      const auto& sv = svd.singularValues();
      if (sv(sv.size() - 1) <= 1e-10 * sv(0))
        throw std::runtime_error("conjecture_probe: non-free orbit detected for N_G=" +
                                 std::to_string(N_G));
    }

    for (int trial = 0; trial < opts.trials; ++trial) {
      const std::uint64_t s =
          derive_seed(opts.seed, static_cast<std::uint64_t>(vi) * 1000 +
                                     static_cast<std::uint64_t>(trial));
      const SubmoduleBasis basis = generate_submodule_basis(rep, opts.beta, s);
      const Index d = basis.dim();
      if (d != opts.beta * N_G)
        throw std::runtime_error("conjecture_probe: non-free orbit (rank " + std::to_string(d) +
                                 " != beta*N_G)");
      const Index N = opts.n_over_d * d;
      Rng rng = make_rng(derive_seed(s, 7));
      Eigen::MatrixXd A(d, N);
      for (Index j = 0; j < N; ++j) A.col(j) = unit_sphere_vector(d, rng);
      // polar body of the program for the first point
      const Eigen::MatrixXd dict = reduced_group_dictionary(basis, A.rightCols(N - 1));
      InradiusOptions iopts = opts.inradius;
      iopts.seed = derive_seed(s, 13);
      const PairedInradius pr = estimate_inradius_pair(dict, N - 1, N_G, iopts);
      fit.rows.push_back({N_G, trial, pr.group.r_hat, pr.ssc.r_hat, N, d});
    }
  }

  // least-squares fit of log r - log r_ssc against log N_G
  std::vector<double> xs, ys;
  for (const auto& row : fit.rows) {
    xs.push_back(std::log(static_cast<double>(row.N_G)));
    ys.push_back(std::log(row.r_hat) - std::log(row.r_hat_ssc));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx > 0.0) fit.slope = sxy / sxx;  // NaN when fewer than two distinct N_G

  // constant of the conjectured form, averaged over rows in log space
  double acc = 0.0;
  for (const auto& row : fit.rows) {
    const double baseline = std::sqrt(
        std::log(static_cast<double>(row.N) / static_cast<double>(row.d)) /
        static_cast<double>(row.d));
    acc += std::log(row.r_hat) - 0.5 * std::log(static_cast<double>(row.N_G)) -
           std::log(baseline);
  }
  fit.c0_hat = std::exp(acc / n);
  return fit;
}

// ---------------------------------------------------------------------------
// report container
// ---------------------------------------------------------------------------

struct GeometryReport {
  Eigen::MatrixXd affinity_matrix;                      // L x L submodule affinities
  std::vector<double> inradius_estimates;               // r̂(P°) per probed program
  std::vector<double> ssc_inradius_estimates;           // r̂(P°_ssc), same direction samples
  std::vector<double> c1_values, c2_values;             // per evaluated pair
  std::vector<PairwiseConditionResult> condition_flags; // pairwise sufficient condition
  ConjectureFit conjecture_fit;
};

}  // namespace ssmc
