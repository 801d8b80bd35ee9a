#pragma once

// Operator-splitting solvers for the group-sparse self-representation
// programs:
//
//   primal       min ||reshape(c)||_{1,2}  s.t.  M c = y
//   regularized  min ||reshape(c)||_{1,2} + reg_lambda * ||M c - y||^2
//   dual         max y^T lambda  s.t.  ||reshape(M^T lambda)||_{inf,2} <= 1
//
// plus the dual-certificate conditions that pin the row support of every
// optimal primal solution.
//
// All three solvers run ADMM with a single cached n x n eigendecomposition of
// M M^T; the affine projection, the Woodbury-inverted regularized step and the
// dual least-squares step are all shifted solves against that factorization,
// so the optional residual-balancing rho adaptation costs nothing.

#include "ssmc/group.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace ssmc {

/// Thrown by solve_primal when y is not in range(M).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SolverTrace {
  int iter;
  double primal_res;
  double dual_res;
  double objective;
};

struct SolverConfig {
  double rho = 1.0;                 // splitting penalty
  int max_iters = 5000;
  double tol_primal = 1e-8;
  double tol_dual = 1e-8;
  std::optional<double> reg_lambda; // presence selects the regularized problem
  bool adaptive_rho = true;         // factor-2 residual balancing
  double over_relaxation = 1.0;     // alpha in [1, 2)
  std::function<void(const SolverTrace&)> trace;  // per-iteration diagnostics

  void validate() const {
    if (!(rho > 0.0)) throw std::invalid_argument("SolverConfig: rho must be positive");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters >= 1");
    if (!(tol_primal > 0.0) || !(tol_dual > 0.0))
      throw std::invalid_argument("SolverConfig: tolerances must be positive");
    if (reg_lambda && !(*reg_lambda >= 0.0))
      throw std::invalid_argument("SolverConfig: reg_lambda must be nonnegative");
    if (over_relaxation < 1.0 || over_relaxation >= 2.0)
      throw std::invalid_argument("SolverConfig: over_relaxation in [1, 2)");
  }
};

struct SolveResult {
  Eigen::VectorXd c;       // flat coefficients, length K*N_G
  GroupMatrix C;           // reshape(c)
  double objective = 0.0;  // norm_1_2(C)
  double residual = 0.0;   // ||M c - y||_2
  int iterations = 0;
  bool converged = false;
  std::optional<Eigen::VectorXd> dual;  // filled by solve_dual-based paths only
};

struct DualResult {
  Eigen::VectorXd lambda;
  double value = 0.0;  // y^T lambda
  int iterations = 0;
  bool converged = false;
};

/// Proximal map of tau * ||reshape(.)||_{1,2}: each row r of R is scaled by
/// max(0, 1 - tau/||r||_2); rows inside the threshold become exactly zero.
inline GroupMatrix block_soft_threshold(const GroupMatrix& R, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("block_soft_threshold: tau must be positive");
  GroupMatrix out(R.rows(), R.cols());
  for (Index i = 0; i < R.rows(); ++i) {
    const double nr = R.row(i).norm();
    if (nr <= tau)
      out.row(i).setZero();
    else
      out.row(i) = R.row(i) * (1.0 - tau / nr);
  }
  return out;
}

namespace detail {

// Eigendecomposition of M M^T shared by all ADMM sub-steps.
class GramCache {
 public:
  explicit GramCache(const Eigen::MatrixXd& M) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M * M.transpose());
    if (es.info() != Eigen::Success)
      throw std::runtime_error("GramCache: eigendecomposition failed");
    V_ = es.eigenvectors();
    evals_ = es.eigenvalues().cwiseMax(0.0);
    const double max_eval = evals_.size() > 0 ? evals_.maxCoeff() : 0.0;
    rank_tol_ = max_eval * 1e-12;
  }

  // (M M^T)^+ w
  Eigen::VectorXd pinv_apply(const Eigen::VectorXd& w) const {
    Eigen::VectorXd t = V_.transpose() * w;
    for (Index i = 0; i < t.size(); ++i) t(i) = evals_(i) > rank_tol_ ? t(i) / evals_(i) : 0.0;
    return V_ * t;
  }

  // (alpha I + M M^T)^{-1} w, alpha > 0
  Eigen::VectorXd shifted_solve(double alpha, const Eigen::VectorXd& w) const {
    Eigen::VectorXd t = V_.transpose() * w;
    for (Index i = 0; i < t.size(); ++i) t(i) /= alpha + evals_(i);
    return V_ * t;
  }

  // Orthogonal projection onto range(M) = range(M M^T).
  Eigen::VectorXd range_project(const Eigen::VectorXd& y) const {
    Eigen::VectorXd t = V_.transpose() * y;
    for (Index i = 0; i < t.size(); ++i)
      if (evals_(i) <= rank_tol_) t(i) = 0.0;
    return V_ * t;
  }

 private:
  Eigen::MatrixXd V_;
  Eigen::VectorXd evals_;
  double rank_tol_ = 0.0;
};

// Factor-2 residual balancing; returns true if rho changed (u is rescaled).
inline bool balance_rho(double& rho, Eigen::VectorXd& u, double r, double s) {
  constexpr double kRatio = 10.0;
  constexpr double kMin = 1e-6, kMax = 1e6;
  if (r > kRatio * s && rho * 2.0 <= kMax) {
    rho *= 2.0;
    u *= 0.5;
    return true;
  }
  if (s > kRatio * r && rho * 0.5 >= kMin) {
    rho *= 0.5;
    u *= 2.0;
    return true;
  }
  return false;
}

}  // namespace detail

/// Equality-constrained group-sparse program. The c-step projects onto the
/// affine set {M c = y} through the cached factorization (pseudoinverse when
/// rank-deficient); the z-step is the row-wise block soft threshold with
/// threshold 1/rho. The returned coefficients are the z iterate, so detected
/// row supports are exact zeros.
inline SolveResult solve_primal(const Eigen::VectorXd& y, const Eigen::MatrixXd& M, Index K,
                                Index N_G, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (cfg.reg_lambda)
    throw std::invalid_argument("solve_primal: reg_lambda set; use solve_regularized");
  if (y.size() != M.rows() || M.cols() != K * N_G)
    throw std::invalid_argument("solve_primal: dimension mismatch");
  const Index dim = K * N_G;

  detail::GramCache cache(M);
  const double y_norm = y.norm();
  if ((y - cache.range_project(y)).norm() > 1e-8 * y_norm)
    throw InfeasibleError("solve_primal: y is not in the range of the dictionary");

  double rho = cfg.rho;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd c(dim), z_old(dim), best_z = z;
  double best_score = std::numeric_limits<double>::infinity();
  bool converged = false;
  int it = 0;
  while (it < cfg.max_iters) {
    ++it;
    const Eigen::VectorXd v = z - u;
    c = v - M.transpose() * cache.pinv_apply(M * v - y);
    const Eigen::VectorXd c_hat = cfg.over_relaxation * c + (1.0 - cfg.over_relaxation) * z;
    z_old = z;
    z = flatten_group(block_soft_threshold(reshape_group(c_hat + u, K, N_G), 1.0 / rho));
    u += c_hat - z;

    const double r = (c - z).norm();
    const double s = rho * (z - z_old).norm();
    if (cfg.trace) cfg.trace({it, r, s, norm_1_2(reshape_group(z, K, N_G))});
    if (r + s < best_score) {
      best_score = r + s;
      best_z = z;
    }
    const double eps_pri = cfg.tol_primal * (1.0 + std::max(c.norm(), z.norm()));
    const double eps_dual = cfg.tol_dual * (1.0 + rho * u.norm());
    if (r <= eps_pri && s <= eps_dual &&
        (M * z - y).norm() <= cfg.tol_primal * (1.0 + y_norm)) {
      converged = true;
      break;
    }
    if (cfg.adaptive_rho && it % 10 == 0) detail::balance_rho(rho, u, r, s);
  }

  SolveResult res;
  res.c = converged ? z : best_z;
  res.C = reshape_group(res.c, K, N_G);
  res.objective = norm_1_2(res.C);
  res.residual = (M * res.c - y).norm();
  res.iterations = it;
  res.converged = converged;
  return res;
}

inline SolveResult solve_primal(const Eigen::VectorXd& y, const GroupDictionary& dict,
                                const SolverConfig& cfg = {}) {
  return solve_primal(y, dict.expanded, dict.K(), dict.order(), cfg);
}

/// Regularized variant: the c-step solves (2*lambda*M^T M + rho I) c = rhs via
/// the Woodbury identity against the cached n x n factorization. Larger
/// reg_lambda tightens the data fit.
inline SolveResult solve_regularized(const Eigen::VectorXd& y, const Eigen::MatrixXd& M, Index K,
                                     Index N_G, const SolverConfig& cfg) {
  cfg.validate();
  if (!cfg.reg_lambda || !(*cfg.reg_lambda > 0.0))
    throw std::invalid_argument("solve_regularized: reg_lambda must be positive");
  const double lam = *cfg.reg_lambda;
  if (y.size() != M.rows() || M.cols() != K * N_G)
    throw std::invalid_argument("solve_regularized: dimension mismatch");
  const Index dim = K * N_G;

  detail::GramCache cache(M);
  const Eigen::VectorXd Mty2l = 2.0 * lam * (M.transpose() * y);

  double rho = cfg.rho;
  Eigen::VectorXd z = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd c(dim), z_old(dim), best_z = z;
  double best_score = std::numeric_limits<double>::infinity();
  bool converged = false;
  int it = 0;
  while (it < cfg.max_iters) {
    ++it;
    const Eigen::VectorXd w = Mty2l + rho * (z - u);
    c = (w - M.transpose() * cache.shifted_solve(rho / (2.0 * lam), M * w)) / rho;
    const Eigen::VectorXd c_hat = cfg.over_relaxation * c + (1.0 - cfg.over_relaxation) * z;
    z_old = z;
    z = flatten_group(block_soft_threshold(reshape_group(c_hat + u, K, N_G), 1.0 / rho));
    u += c_hat - z;

    const double r = (c - z).norm();
    const double s = rho * (z - z_old).norm();
    if (cfg.trace) cfg.trace({it, r, s, norm_1_2(reshape_group(z, K, N_G))});
    if (r + s < best_score) {
      best_score = r + s;
      best_z = z;
    }
    const double eps_pri = cfg.tol_primal * (1.0 + std::max(c.norm(), z.norm()));
    const double eps_dual = cfg.tol_dual * (1.0 + rho * u.norm());
    if (r <= eps_pri && s <= eps_dual) {
      converged = true;
      break;
    }
    if (cfg.adaptive_rho && it % 10 == 0) detail::balance_rho(rho, u, r, s);
  }

  SolveResult res;
  res.c = converged ? z : best_z;
  res.C = reshape_group(res.c, K, N_G);
  res.objective = norm_1_2(res.C);
  res.residual = (M * res.c - y).norm();
  res.iterations = it;
  res.converged = converged;
  return res;
}

inline SolveResult solve_regularized(const Eigen::VectorXd& y, const GroupDictionary& dict,
                                     const SolverConfig& cfg) {
  return solve_regularized(y, dict.expanded, dict.K(), dict.order(), cfg);
}

/// Dual program: splits w = M^T lambda with w constrained to the product of
/// row-wise unit l2 balls. The lambda-step is a least-squares solve against
/// the cached factorization; the w-step projects each row of reshape(w) onto
/// the unit ball. The returned lambda is rescaled to exact feasibility when
/// the iterate overshoots the ball by a hair.
inline DualResult solve_dual(const Eigen::VectorXd& y, const Eigen::MatrixXd& M, Index K,
                             Index N_G, const SolverConfig& cfg = {}) {
  cfg.validate();
  if (y.size() != M.rows() || M.cols() != K * N_G)
    throw std::invalid_argument("solve_dual: dimension mismatch");
  const Index dim = K * N_G;

  detail::GramCache cache(M);

  double rho = cfg.rho;
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(y.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd w_old(dim);
  bool converged = false;
  int it = 0;
  while (it < cfg.max_iters) {
    ++it;
    lambda = cache.pinv_apply(y / rho + M * (w - u));
    const Eigen::VectorXd Mtl = M.transpose() * lambda;
    const Eigen::VectorXd m_hat = cfg.over_relaxation * Mtl + (1.0 - cfg.over_relaxation) * w;
    w_old = w;
    GroupMatrix W = reshape_group(m_hat + u, K, N_G);
    for (Index i = 0; i < K; ++i) {
      const double nr = W.row(i).norm();
      if (nr > 1.0) W.row(i) /= nr;
    }
    w = flatten_group(W);
    u += m_hat - w;

    const double r = (Mtl - w).norm();
    const double s = rho * (w - w_old).norm();
    if (cfg.trace) cfg.trace({it, r, s, y.dot(lambda)});
    const double eps_pri = cfg.tol_primal * (1.0 + std::max(Mtl.norm(), w.norm()));
    const double eps_dual = cfg.tol_dual * (1.0 + rho * u.norm());
    if (r <= eps_pri && s <= eps_dual) {
      converged = true;
      break;
    }
    if (cfg.adaptive_rho && it % 10 == 0) detail::balance_rho(rho, u, r, s);
  }

  // exact feasibility: scale into the dual ball if the iterate overshoots
  const double feas = norm_inf_2(reshape_group(M.transpose() * lambda, K, N_G));
  if (feas > 1.0) lambda /= feas;

  DualResult res;
  res.lambda = lambda;
  res.value = y.dot(lambda);
  res.iterations = it;
  res.converged = converged;
  return res;
}

inline DualResult solve_dual(const Eigen::VectorXd& y, const GroupDictionary& dict,
                             const SolverConfig& cfg = {}) {
  return solve_dual(y, dict.expanded, dict.K(), dict.order(), cfg);
}

// ---------------------------------------------------------------------------
// Dual certificate
// ---------------------------------------------------------------------------

struct CertificateTolerances {
  double support_eps = 1e-6;    // row-support threshold, relative to max row norm
  double cert_tol = 1e-4;
  double strict_margin = 1e-8;  // the strict inequality (c3) as a margin
};

struct CertificateReport {
  std::vector<Index> support;   // S: detected nonzero rows of C
  double cond_c1_err = 0.0;     // max_{i in S} || [reshape(M_S^T l)]_i - C_i/||C_i|| ||
  double cond_c2_max = 0.0;     // ||reshape(M_{T \ S}^T l)||_{inf,2}
  double cond_c3_max = 0.0;     // ||reshape(M_{T^c}^T l)||_{inf,2}
  bool passed = false;
};

/// Rows of C whose l2 norm exceeds support_eps * (largest row norm).
inline std::vector<Index> row_support(const GroupMatrix& C, double support_eps = 1e-6) {
  std::vector<Index> S;
  if (C.rows() == 0) return S;
  const Eigen::VectorXd norms = C.rowwise().norm();
  const double cutoff = support_eps * norms.maxCoeff();
  for (Index i = 0; i < C.rows(); ++i)
    if (norms(i) > cutoff && norms(i) > 0.0) S.push_back(i);
  return S;
}

/// Evaluates the three certificate conditions for the candidate (C, lambda)
/// against a target row set T. Maxima over empty row sets are 0, so (c2) and
/// (c3) are vacuously satisfied when their index sets are empty. Throws if the
/// detected support is not contained in T.
inline CertificateReport check_certificate(const GroupMatrix& C, const Eigen::VectorXd& lambda,
                                           const Eigen::MatrixXd& M, Index K, Index N_G,
                                           std::span<const Index> T,
                                           const CertificateTolerances& tols = {}) {
  if (C.rows() != K || C.cols() != N_G)
    throw std::invalid_argument("check_certificate: C layout does not match dictionary");

  std::vector<bool> inT(static_cast<size_t>(K), false);
  for (Index t : T) {
    if (t < 0 || t >= K) throw std::out_of_range("check_certificate: T index out of range");
    inT[static_cast<size_t>(t)] = true;
  }

  CertificateReport rep;
  rep.support = row_support(C, tols.support_eps);
  for (Index i : rep.support)
    if (!inT[static_cast<size_t>(i)])
      throw std::invalid_argument("check_certificate: support S is not contained in T");

  std::vector<bool> inS(static_cast<size_t>(K), false);
  for (Index i : rep.support) inS[static_cast<size_t>(i)] = true;

  std::vector<Index> T_not_S, T_c;
  for (Index i = 0; i < K; ++i) {
    if (inT[static_cast<size_t>(i)]) {
      if (!inS[static_cast<size_t>(i)]) T_not_S.push_back(i);
    } else {
      T_c.push_back(i);
    }
  }

  if (!rep.support.empty()) {
    const Eigen::MatrixXd M_S = select_group_columns(M, K, N_G, rep.support);
    const GroupMatrix R_S =
        reshape_group(M_S.transpose() * lambda, static_cast<Index>(rep.support.size()), N_G);
    for (size_t t = 0; t < rep.support.size(); ++t) {
      const Index i = rep.support[t];
      const Eigen::RowVectorXd target = C.row(i) / C.row(i).norm();
      rep.cond_c1_err =
          std::max(rep.cond_c1_err, (R_S.row(static_cast<Index>(t)) - target).norm());
    }
  }
  if (!T_not_S.empty()) {
    const Eigen::MatrixXd M_TS = select_group_columns(M, K, N_G, T_not_S);
    rep.cond_c2_max = norm_inf_2(
        reshape_group(M_TS.transpose() * lambda, static_cast<Index>(T_not_S.size()), N_G));
  }
  if (!T_c.empty()) {
    const Eigen::MatrixXd M_Tc = select_group_columns(M, K, N_G, T_c);
    rep.cond_c3_max = norm_inf_2(
        reshape_group(M_Tc.transpose() * lambda, static_cast<Index>(T_c.size()), N_G));
  }
  rep.passed = rep.cond_c1_err <= tols.cert_tol && rep.cond_c2_max <= 1.0 + tols.cert_tol &&
               rep.cond_c3_max < 1.0 - tols.strict_margin;
  return rep;
}

inline CertificateReport check_certificate(const GroupMatrix& C, const Eigen::VectorXd& lambda,
                                           const GroupDictionary& dict, std::span<const Index> T,
                                           const CertificateTolerances& tols = {}) {
  return check_certificate(C, lambda, dict.expanded, dict.K(), dict.order(), T, tols);
}

/// v = Q * lambda / ||lambda||_2 — the unit direction in ambient space the
/// dual solution of a reduced-coordinate program points at.
template <typename Basis>
inline Eigen::VectorXd group_dual_direction(const Eigen::VectorXd& lambda, const Basis& basis) {
  const double nl = lambda.norm();
  if (nl == 0.0) throw std::invalid_argument("group_dual_direction: zero lambda");
  if (lambda.size() != basis.Q.cols())
    throw std::invalid_argument("group_dual_direction: lambda must live in reduced coordinates");
  return basis.Q * (lambda / nl);
}

}  // namespace ssmc
