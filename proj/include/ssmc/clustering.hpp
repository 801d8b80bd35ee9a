#pragma once

// Affinity assembly from per-point group-sparse solves, spectral clustering on
// the normalized symmetric Laplacian, and permutation-minimal error scoring.

#include "ssmc/group.hpp"
#include "ssmc/parallel.hpp"
#include "ssmc/random.hpp"
#include "ssmc/solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

namespace ssmc {

/// Thrown by build_affinity when every column solve failed.
class AllColumnsFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnStatus { ok, not_converged, infeasible };

struct AffinityMatrix {
  Eigen::MatrixXd C;  // column i = row l2 norms of reshape(c_i), 0 at the diagonal
  Eigen::MatrixXd W;  // C + C^T (entries are norms, so |.| is a no-op)
  std::vector<ColumnStatus> status;

  bool has_warnings() const {
    return std::any_of(status.begin(), status.end(),
                       [](ColumnStatus s) { return s != ColumnStatus::ok; });
  }
};

struct AffinityOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// For each column i: build the dictionary over all other columns, solve the
/// self-representation program (primal in exact mode, regularized when
/// cfg.reg_lambda is set) and scatter the N-1 group row norms into column i
/// with a 0 inserted at the excluded diagonal position. Non-convergence is
/// recorded per column; infeasible columns stay zero. Throws only when every
/// column fails to produce coefficients.
inline AffinityMatrix build_affinity(const Eigen::MatrixXd& X, const GroupRepresentation& rep,
                                     const SolverConfig& cfg, const AffinityOptions& opts = {}) {
  const Index N = X.cols();
  if (N < 2) throw std::invalid_argument("build_affinity: need at least two data points");
  AffinityMatrix A;
  A.C = Eigen::MatrixXd::Zero(N, N);
  A.status.assign(static_cast<size_t>(N), ColumnStatus::ok);

  parallel_for(0, N, opts.threads, [&](std::ptrdiff_t i) {
    const GroupDictionary dict = build_group_dictionary(X, static_cast<Index>(i), rep);
    try {
      const SolveResult sol = cfg.reg_lambda ? solve_regularized(X.col(i), dict, cfg)
                                             : solve_primal(X.col(i), dict, cfg);
      if (!sol.converged) A.status[static_cast<size_t>(i)] = ColumnStatus::not_converged;
      const Eigen::VectorXd row_norms = sol.C.rowwise().norm();
      for (Index t = 0; t < row_norms.size(); ++t) {
        const Index j = t < i ? t : t + 1;  // base index t skips the excluded column
        A.C(j, i) = row_norms(t);
      }
    } catch (const InfeasibleError&) {
      A.status[static_cast<size_t>(i)] = ColumnStatus::infeasible;
    }
  });

  if (std::all_of(A.status.begin(), A.status.end(),
                  [](ColumnStatus s) { return s == ColumnStatus::infeasible; }))
    throw AllColumnsFailed("build_affinity: every column solve was infeasible");

  A.W = A.C + A.C.transpose();
  return A;
}

struct ClusteringResult {
  std::vector<int> assignments;  // 0-based cluster index per point
  int num_clusters = 0;
  double error_rate = -1.0;      // filled by score_clustering when truth is known
  std::uint64_t seed = 0;
};

struct SpectralOptions {
  int kmeans_restarts = 20;
  int kmeans_max_iters = 100;
};

namespace detail {

// Lloyd iterations with greedy farthest-point init; returns SSE.
inline double kmeans_once(const Eigen::MatrixXd& pts, int L, Rng& rng, int max_iters,
                          std::vector<int>& labels) {
  const Index N = pts.rows();
  std::vector<Index> centers_idx;
  centers_idx.push_back(
      static_cast<Index>(std::uniform_int_distribution<Index>(0, N - 1)(rng)));
  Eigen::VectorXd min_d2 =
      (pts.rowwise() - pts.row(centers_idx[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers_idx.size()) < L) {
    Index far = 0;
    min_d2.maxCoeff(&far);
    centers_idx.push_back(far);
    const Eigen::VectorXd d2 = (pts.rowwise() - pts.row(far)).rowwise().squaredNorm();
    min_d2 = min_d2.cwiseMin(d2);
  }
  Eigen::MatrixXd centers(L, pts.cols());
  for (int k = 0; k < L; ++k) centers.row(k) = pts.row(centers_idx[static_cast<size_t>(k)]);

  labels.assign(static_cast<size_t>(N), 0);
  double sse = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    sse = 0.0;
    for (Index i = 0; i < N; ++i) {
      int best = 0;
      double best_d2 = (pts.row(i) - centers.row(0)).squaredNorm();
      for (int k = 1; k < L; ++k) {
        const double d2 = (pts.row(i) - centers.row(k)).squaredNorm();
        if (d2 < best_d2) {
          best_d2 = d2;
          best = k;
        }
      }
      if (labels[static_cast<size_t>(i)] != best) {
        labels[static_cast<size_t>(i)] = best;
        changed = true;
      }
      sse += best_d2;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(L, pts.cols());
    std::vector<Index> counts(static_cast<size_t>(L), 0);
    for (Index i = 0; i < N; ++i) {
      sums.row(labels[static_cast<size_t>(i)]) += pts.row(i);
      ++counts[static_cast<size_t>(labels[static_cast<size_t>(i)])];
    }
    for (int k = 0; k < L; ++k) {
      if (counts[static_cast<size_t>(k)] > 0) {
        centers.row(k) = sums.row(k) / static_cast<double>(counts[static_cast<size_t>(k)]);
      } else {
        // re-seed an empty cluster with the point farthest from its center
        Index far = 0;
        double far_d2 = -1.0;
        for (Index i = 0; i < N; ++i) {
          const double d2 = (pts.row(i) - centers.row(labels[static_cast<size_t>(i)])).squaredNorm();
          if (d2 > far_d2) {
            far_d2 = d2;
            far = i;
          }
        }
        centers.row(k) = pts.row(far);
        changed = true;
      }
    }
    if (!changed) break;
  }
  return sse;
}

}  // namespace detail

/// Normalized-cut spectral clustering: L_sym = I - D^{-1/2} W D^{-1/2} with a
/// degree-zero guard (isolated rows stay identity rows), bottom L eigenvectors,
/// row normalization, then seeded k-means with greedy farthest-point init and
/// kmeans_restarts restarts. Deterministic given (W, L, seed).
inline ClusteringResult spectral_cluster(const Eigen::MatrixXd& W, int L, std::uint64_t seed,
                                         const SpectralOptions& opts = {}) {
  const Index N = W.rows();
  if (W.cols() != N) throw std::invalid_argument("spectral_cluster: W must be square");
  if (L < 1) throw std::invalid_argument("spectral_cluster: L >= 1");
  if (L > N) throw std::invalid_argument("spectral_cluster: more clusters than points");
  const double scale = std::max(1.0, W.cwiseAbs().maxCoeff());
  if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("spectral_cluster: W must be symmetric");

  Eigen::VectorXd deg = W.rowwise().sum();
  Eigen::VectorXd dinv_sqrt(N);
  for (Index i = 0; i < N; ++i) dinv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
  Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(N, N) -
                        dinv_sqrt.asDiagonal() * W * dinv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lap);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("spectral_cluster: eigendecomposition failed");
  Eigen::MatrixXd Y = es.eigenvectors().leftCols(L);
  for (Index i = 0; i < N; ++i) {
    const double nr = Y.row(i).norm();
    if (nr > 0.0) Y.row(i) /= nr;
  }

  Rng rng = make_rng(seed);
  std::vector<int> best_labels;
  double best_sse = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < opts.kmeans_restarts; ++restart) {
    std::vector<int> labels;
    const double sse = detail::kmeans_once(Y, L, rng, opts.kmeans_max_iters, labels);
    if (sse < best_sse) {
      best_sse = sse;
      best_labels = std::move(labels);
    }
  }

  ClusteringResult res;
  res.assignments = std::move(best_labels);
  res.num_clusters = L;
  res.seed = seed;
  return res;
}

namespace detail {

// Max-weight assignment on a square cost matrix (Hungarian algorithm with
// potentials, O(n^3)); returns total matched weight.
inline double hungarian_max_weight(const Eigen::MatrixXd& weight) {
  const Index n = weight.rows();
  const double wmax = n > 0 ? weight.maxCoeff() : 0.0;
  // convert to min-cost
  std::vector<std::vector<double>> cost(static_cast<size_t>(n + 1),
                                        std::vector<double>(static_cast<size_t>(n + 1), 0.0));
  for (Index i = 1; i <= n; ++i)
    for (Index j = 1; j <= n; ++j)
      cost[static_cast<size_t>(i)][static_cast<size_t>(j)] = wmax - weight(i - 1, j - 1);

  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n + 1), 0.0), v(static_cast<size_t>(n + 1), 0.0);
  std::vector<Index> p(static_cast<size_t>(n + 1), 0), way(static_cast<size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n + 1), INF);
    std::vector<bool> used(static_cast<size_t>(n + 1), false);
    do {
      used[static_cast<size_t>(j0)] = true;
      const Index i0 = p[static_cast<size_t>(j0)];
      double delta = INF;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost[static_cast<size_t>(i0)][static_cast<size_t>(j)] -
                           u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (Index j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] != 0) total += weight(p[static_cast<size_t>(j)] - 1, j - 1);
  return total;
}

}  // namespace detail

/// Fraction of points misassigned under the best bijective relabeling of the
/// predicted clusters (maximum-weight matching on the confusion matrix).
inline double score_clustering(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("score_clustering: length mismatch");
  if (pred.empty()) return 0.0;
  std::map<int, Index> pmap, tmap;
  for (int l : pred)
    if (!pmap.count(l)) pmap.emplace(l, static_cast<Index>(pmap.size()));
  for (int l : truth)
    if (!tmap.count(l)) tmap.emplace(l, static_cast<Index>(tmap.size()));
  const Index side = std::max(static_cast<Index>(pmap.size()), static_cast<Index>(tmap.size()));
  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(side, side);
  for (size_t i = 0; i < pred.size(); ++i)
    confusion(pmap.at(pred[i]), tmap.at(truth[i])) += 1.0;
  const double matched = detail::hungarian_max_weight(confusion);
  return 1.0 - matched / static_cast<double>(pred.size());
}

}  // namespace ssmc
