#pragma once

// Seeded RNG helpers. All sampling in the library flows through these so that
// (config, seed) pins every result.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace ssmc {

using Index = Eigen::Index;
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Seed for an independent worker stream (trial index, column index, ...).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 step keeps derived streams decorrelated
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Eigen::VectorXd gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Eigen::MatrixXd gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) M(r, c) = normal(rng);
  return M;
}

/// Uniform draw from the unit sphere S^{n-1} (normalized Gaussian).
inline Eigen::VectorXd unit_sphere_vector(Index n, Rng& rng) {
  Eigen::VectorXd v = gaussian_vector(n, rng);
  double nv = v.norm();
  while (nv == 0.0) {  // probability-zero guard
    v = gaussian_vector(n, rng);
    nv = v.norm();
  }
  return v / nv;
}

}  // namespace ssmc
