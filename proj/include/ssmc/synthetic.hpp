#pragma once

// Generation of G-invariant subspace bases (orbit construction) and
// semi-random datasets X^l = Q^(l) A^l with unit-sphere coefficients.

#include "ssmc/group.hpp"
#include "ssmc/random.hpp"

#include <Eigen/SVD>

#include <optional>
#include <stdexcept>
#include <vector>

namespace ssmc {

/// Orthonormal basis Q of a G-invariant subspace (submodule) of dimension
/// dim() = Q.cols(). Invariance: every column of L_g Q stays in range(Q).
struct SubmoduleBasis {
  Eigen::MatrixXd Q;
  GroupRepresentation rep;

  Index n() const { return Q.rows(); }
  Index dim() const { return Q.cols(); }
};

/// max_g ||(I - QQ^T) L_g Q||_F — zero (to fp) for a genuine submodule.
inline double invariance_residual(const SubmoduleBasis& basis) {
  double worst = 0.0;
  for (Index g = 0; g < basis.rep.order(); ++g) {
    const Eigen::MatrixXd LQ = basis.rep.apply(g, basis.Q);
    worst = std::max(worst, (LQ - basis.Q * (basis.Q.transpose() * LQ)).norm());
  }
  return worst;
}

inline double orthonormality_residual(const SubmoduleBasis& basis) {
  const Index d = basis.dim();
  return (basis.Q.transpose() * basis.Q - Eigen::MatrixXd::Identity(d, d)).norm();
}

/// Span of the orbits of num_seeds Gaussian seed vectors, orthonormalized by
/// SVD with numerical-rank tolerance 1e-10 relative to the top singular value.
/// The span of a union of orbits is G-invariant by construction; the reached
/// dimension is detected (sums of orbit ranks), not prescribed.
///
/// `support`: optional coordinate subset; seed vectors are Gaussian on these
/// coordinates and zero elsewhere (used to build disjoint-block submodules).
inline SubmoduleBasis generate_submodule_basis(const GroupRepresentation& rep, Index num_seeds,
                                               std::uint64_t rng_seed,
                                               std::optional<std::vector<Index>> support = {}) {
  if (num_seeds < 1) throw std::invalid_argument("generate_submodule_basis: num_seeds >= 1");
  const Index n = rep.n();
  if (support)
    for (Index idx : *support)
      if (idx < 0 || idx >= n)
        throw std::out_of_range("generate_submodule_basis: support index out of range");
  Rng rng = make_rng(rng_seed);
  const Index N_G = rep.order();
  Eigen::MatrixXd orbit(n, num_seeds * N_G);
  for (Index s = 0; s < num_seeds; ++s) {
    Eigen::VectorXd u;
    int attempts = 0;
    do {
      if (++attempts > 10)
        throw std::runtime_error("generate_submodule_basis: degenerate RNG output");
      if (support) {
        u = Eigen::VectorXd::Zero(n);
        for (Index idx : *support) u(idx) = std::normal_distribution<double>{}(rng);
      } else {
        u = gaussian_vector(n, rng);
      }
    } while (u.norm() == 0.0);
    for (Index g = 0; g < N_G; ++g) orbit.col(s * N_G + g) = rep.apply(g, u);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(orbit, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  const double cutoff = 1e-10 * sv(0);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > cutoff) ++rank;
  if (rank == 0) throw std::runtime_error("generate_submodule_basis: zero-rank orbit");
  SubmoduleBasis basis;
  basis.Q = svd.matrixU().leftCols(rank);
  basis.rep = rep;
  return basis;
}

/// Plain random subspace basis (orthonormalized Gaussian), attached to the
/// trivial group. Not invariant under any larger group — used by scrambling
/// experiments where the ground-truth clusters are subspaces, not modules.
inline SubmoduleBasis generate_subspace_basis(Index n, Index dim, std::uint64_t rng_seed) {
  if (dim < 1 || dim > n) throw std::invalid_argument("generate_subspace_basis: need 1 <= dim <= n");
  Rng rng = make_rng(rng_seed);
  const Eigen::MatrixXd G = gaussian_matrix(n, dim, rng);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU);
  SubmoduleBasis basis;
  basis.Q = svd.matrixU().leftCols(dim);
  basis.rep = GroupRepresentation::trivial(n);
  return basis;
}

struct SyntheticDataset {
  Eigen::MatrixXd X;                    // n x N, submodule blocks concatenated
  std::vector<int> labels;              // ground-truth submodule index per column
  std::vector<SubmoduleBasis> bases;
  std::vector<Eigen::MatrixXd> coefficients;  // per-submodule d_l x N_l, unit columns
  std::uint64_t seed = 0;

  Index n() const { return X.rows(); }
  Index N() const { return X.cols(); }
};

/// Semi-random model: coefficient columns uniform on S^{d_l - 1}
/// (normalized Gaussians), X^l = Q^l A^l. Deterministic given rng_seed.
inline SyntheticDataset sample_semi_random(const std::vector<SubmoduleBasis>& bases,
                                           const std::vector<Index>& counts,
                                           std::uint64_t rng_seed) {
  if (bases.empty()) throw std::invalid_argument("sample_semi_random: empty basis list");
  if (counts.size() != bases.size())
    throw std::invalid_argument("sample_semi_random: counts not aligned with bases");
  Index total = 0;
  for (size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] < 1) throw std::invalid_argument("sample_semi_random: each N_l >= 1");
    if (bases[l].n() != bases.front().n())
      throw std::invalid_argument("sample_semi_random: bases live in different ambient spaces");
    total += counts[l];
  }
  Rng rng = make_rng(rng_seed);
  SyntheticDataset ds;
  ds.seed = rng_seed;
  ds.bases = bases;
  ds.X.resize(bases.front().n(), total);
  ds.labels.resize(static_cast<size_t>(total));
  Index offset = 0;
  for (size_t l = 0; l < bases.size(); ++l) {
    const Index d = bases[l].dim();
    Eigen::MatrixXd A(d, counts[l]);
    for (Index j = 0; j < counts[l]; ++j) A.col(j) = unit_sphere_vector(d, rng);
    ds.X.middleCols(offset, counts[l]) = bases[l].Q * A;
    for (Index j = 0; j < counts[l]; ++j) ds.labels[static_cast<size_t>(offset + j)] = static_cast<int>(l);
    ds.coefficients.push_back(std::move(A));
    offset += counts[l];
  }
  return ds;
}

/// Adds i.i.d. N(0, sigma^2) noise to every entry of X; labels, bases and
/// coefficients are left describing the noiseless geometry. sigma = 0 is the
/// identity.
inline SyntheticDataset perturb_dataset(const SyntheticDataset& ds, double noise_sigma,
                                        std::uint64_t rng_seed) {
  if (noise_sigma < 0.0) throw std::invalid_argument("perturb_dataset: negative sigma");
  SyntheticDataset out = ds;
  if (noise_sigma == 0.0) return out;
  Rng rng = make_rng(rng_seed);
  std::normal_distribution<double> normal(0.0, noise_sigma);
  for (Index c = 0; c < out.X.cols(); ++c)
    for (Index r = 0; r < out.X.rows(); ++r) out.X(r, c) += normal(rng);
  return out;
}

}  // namespace ssmc
