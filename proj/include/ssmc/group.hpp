#pragma once

// Finite abelian group representations, group-orbit dictionaries, and the
// reshape / group-norm primitives used throughout the library.
//
// Conventions:
//  - group elements are addressed by 0-based offsets g = 0..order()-1;
//    offset 0 is always the identity element (element "1" in 1-based texts).
//  - images of size n1 x n2 are vectorized column-major: entry (r, c) of the
//    image sits at index c*n1 + r of the vector.
//  - a coefficient vector c of length K*N_G reshapes to a K x N_G matrix
//    whose column g holds the K coefficients of group block g.

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ssmc {

using Index = Eigen::Index;

/// K x N_G view of a flat coefficient vector; row i collects the coefficients
/// of base column i across all group elements.
using GroupMatrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// reshape / norms
// ---------------------------------------------------------------------------

inline GroupMatrix reshape_group(const Eigen::VectorXd& v, Index K, Index N_G) {
  if (K < 0 || N_G < 0 || v.size() != K * N_G)
    throw std::invalid_argument("reshape_group: length(v) != K*N_G");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), K, N_G);
}

inline Eigen::VectorXd flatten_group(const GroupMatrix& M) {
  return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

/// Sum of the l2 norms of the rows.
inline double norm_1_2(const GroupMatrix& M) {
  if (M.size() == 0) return 0.0;
  return M.rowwise().norm().sum();
}

/// Max of the l2 norms of the rows; 0 for an empty matrix.
inline double norm_inf_2(const GroupMatrix& M) {
  if (M.rows() == 0 || M.cols() == 0) return 0.0;
  return M.rowwise().norm().maxCoeff();
}

// ---------------------------------------------------------------------------
// GroupRepresentation
// ---------------------------------------------------------------------------

/// An ordered list of n x n matrices L_g acting on R^n, offset 0 the identity.
/// Commutativity and closure are validated at construction. Dense matrices are
/// the contract; permutation representations additionally carry index maps
/// used as a fast path by apply().
class GroupRepresentation {
 public:
  GroupRepresentation() = default;

  Index n() const { return data_->n; }
  Index order() const { return static_cast<Index>(data_->mats.size()); }

  const Eigen::MatrixXd& matrix(Index g) const { return data_->mats.at(static_cast<size_t>(g)); }
  const std::vector<Eigen::MatrixXd>& matrices() const { return data_->mats; }

  bool is_permutation() const { return !data_->perms.empty(); }

  /// L_g * X (columns transformed); uses the permutation fast path if present.
  Eigen::MatrixXd apply(Index g, const Eigen::MatrixXd& X) const {
    check_g(g);
    if (is_permutation()) {
      const auto& fwd = data_->perms[static_cast<size_t>(g)];
      Eigen::MatrixXd out(X.rows(), X.cols());
      for (Index i = 0; i < X.rows(); ++i) out.row(fwd[static_cast<size_t>(i)]) = X.row(i);
      return out;
    }
    return matrix(g) * X;
  }

  /// L_g^T * X.
  Eigen::MatrixXd apply_transpose(Index g, const Eigen::MatrixXd& X) const {
    check_g(g);
    if (is_permutation()) {
      const auto& fwd = data_->perms[static_cast<size_t>(g)];
      Eigen::MatrixXd out(X.rows(), X.cols());
      for (Index i = 0; i < X.rows(); ++i) out.row(i) = X.row(fwd[static_cast<size_t>(i)]);
      return out;
    }
    return matrix(g).transpose() * X;
  }

  /// JSON descriptor this representation was built from (or an "explicit"
  /// descriptor carrying the matrices row-major).
  nlohmann::json descriptor() const {
    if (!data_->descriptor.is_null()) return data_->descriptor;
    nlohmann::json j;
    j["kind"] = "explicit";
    j["n"] = n();
    auto mats = nlohmann::json::array();
    for (const auto& M : data_->mats) {
      std::vector<double> row_major(static_cast<size_t>(M.size()));
      for (Index r = 0; r < M.rows(); ++r)
        for (Index c = 0; c < M.cols(); ++c)
          row_major[static_cast<size_t>(r * M.cols() + c)] = M(r, c);
      mats.push_back(row_major);
    }
    j["matrices"] = mats;
    return j;
  }

  // -- factories ------------------------------------------------------------

  static GroupRepresentation trivial(Index n) {
    if (n < 1) throw std::invalid_argument("trivial: n must be positive");
    std::vector<std::vector<Index>> perms(1);
    perms[0].resize(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) perms[0][static_cast<size_t>(i)] = i;
    nlohmann::json d{{"kind", "trivial"}, {"n", n}};
    return from_permutations(n, std::move(perms), d);
  }

  /// Cyclic column shifts of n1 x n2 images (column-major vectorization);
  /// element g shifts image columns by g positions, order N_G = n2.
  static GroupRepresentation cyclic_shift(Index n1, Index n2) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("cyclic_shift: n1, n2 must be >= 1");
    const Index n = n1 * n2;
    std::vector<std::vector<Index>> perms(static_cast<size_t>(n2));
    for (Index s = 0; s < n2; ++s) {
      auto& fwd = perms[static_cast<size_t>(s)];
      fwd.resize(static_cast<size_t>(n));
      for (Index c = 0; c < n2; ++c)
        for (Index r = 0; r < n1; ++r)
          fwd[static_cast<size_t>(c * n1 + r)] = ((c + s) % n2) * n1 + r;
    }
    nlohmann::json d{{"kind", "cyclic_shift"}, {"rows", n1}, {"cols", n2}};
    return from_permutations(n, std::move(perms), d);
  }

  /// Build from explicit dense matrices; validates all invariants.
  /// Detects exact permutation matrices and installs the fast path.
  static GroupRepresentation from_matrices(std::vector<Eigen::MatrixXd> mats,
                                           nlohmann::json descriptor = {}) {
    auto data = std::make_shared<Data>();
    if (mats.empty()) throw std::invalid_argument("representation needs at least one matrix");
    data->n = mats.front().rows();
    data->mats = std::move(mats);
    data->descriptor = std::move(descriptor);
    data->perms = detect_permutations(data->mats);
    GroupRepresentation rep;
    rep.data_ = std::move(data);
    rep.validate();
    return rep;
  }

  /// Direct product {A_g B_h} of two commuting representations on the same
  /// space. Products of non-coprime cyclic groups repeat elements; dedup
  /// removes repeats at tolerance 1e-10 * n, keeping first occurrences.
  static GroupRepresentation direct_product(const GroupRepresentation& a,
                                            const GroupRepresentation& b,
                                            bool dedup = false) {
    if (a.n() != b.n())
      throw std::invalid_argument("direct_product: ambient dimensions differ");
    const Index n = a.n();
    const double tol = 1e-10 * static_cast<double>(n);
    for (Index g = 0; g < a.order(); ++g)
      for (Index h = 0; h < b.order(); ++h) {
        const Eigen::MatrixXd ab = a.apply(g, b.matrix(h));
        const Eigen::MatrixXd ba = b.apply(h, a.matrix(g));
        if ((ab - ba).norm() > tol)
          throw std::invalid_argument("direct_product: factor representations do not commute");
      }
    std::vector<Eigen::MatrixXd> mats;
    mats.reserve(static_cast<size_t>(a.order() * b.order()));
    for (Index g = 0; g < a.order(); ++g)
      for (Index h = 0; h < b.order(); ++h) {
        Eigen::MatrixXd M = a.apply(g, b.matrix(h));
        if (dedup) {
          bool seen = false;
          for (const auto& P : mats)
            if ((P - M).norm() <= tol) { seen = true; break; }
          if (seen) continue;
        }
        mats.push_back(std::move(M));
      }
    nlohmann::json d{{"kind", "product"},
                     {"factors", {a.descriptor(), b.descriptor()}},
                     {"dedup", dedup}};
    return from_matrices(std::move(mats), d);
  }

  static GroupRepresentation from_descriptor(const nlohmann::json& j);

  /// Invariant checks: exact identity at offset 0, pairwise commutativity and
  /// closure to 1e-10 * n, orthogonality for permutation representations.
  void validate() const {
    const Index N_G = order();
    const Index nn = n();
    const double tol = 1e-10 * static_cast<double>(nn);
    for (const auto& M : data_->mats)
      if (M.rows() != nn || M.cols() != nn)
        throw std::invalid_argument("representation: matrices must all be n x n");
    if ((matrix(0) - Eigen::MatrixXd::Identity(nn, nn)).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("representation: element at offset 0 must be the exact identity");
    for (Index g = 0; g < N_G; ++g) {
      for (Index h = g + 1; h < N_G; ++h) {
        const Eigen::MatrixXd gh = apply(g, matrix(h));
        const Eigen::MatrixXd hg = apply(h, matrix(g));
        if ((gh - hg).norm() > tol)
          throw std::invalid_argument("representation: matrices do not commute");
      }
      for (Index h = 0; h < N_G; ++h) {
        const Eigen::MatrixXd gh = apply(g, matrix(h));
        bool closed = false;
        for (Index k = 0; k < N_G && !closed; ++k)
          closed = (gh - matrix(k)).norm() <= tol;
        if (!closed)
          throw std::invalid_argument("representation: not closed under composition");
      }
      if (is_permutation()) {
        const Eigen::MatrixXd& M = matrix(g);
        if ((M.transpose() * M - Eigen::MatrixXd::Identity(nn, nn)).norm() > tol)
          throw std::invalid_argument("representation: permutation matrices must be orthogonal");
      }
    }
  }

 private:
  struct Data {
    Index n = 0;
    std::vector<Eigen::MatrixXd> mats;
    std::vector<std::vector<Index>> perms;  // fwd maps; empty if not a permutation rep
    nlohmann::json descriptor;
  };
  std::shared_ptr<const Data> data_ = std::make_shared<Data>();

  void check_g(Index g) const {
    if (g < 0 || g >= order()) throw std::out_of_range("group element offset out of range");
  }

  static GroupRepresentation from_permutations(Index n, std::vector<std::vector<Index>> perms,
                                               nlohmann::json descriptor) {
    auto data = std::make_shared<Data>();
    data->n = n;
    data->perms = std::move(perms);
    data->descriptor = std::move(descriptor);
    data->mats.reserve(data->perms.size());
    for (const auto& fwd : data->perms) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
      for (Index i = 0; i < n; ++i) M(fwd[static_cast<size_t>(i)], i) = 1.0;
      data->mats.push_back(std::move(M));
    }
    GroupRepresentation rep;
    rep.data_ = std::move(data);
    rep.validate();
    return rep;
  }

  static std::vector<std::vector<Index>> detect_permutations(
      const std::vector<Eigen::MatrixXd>& mats) {
    std::vector<std::vector<Index>> perms;
    perms.reserve(mats.size());
    for (const auto& M : mats) {
      std::vector<Index> fwd(static_cast<size_t>(M.cols()), -1);
      std::vector<bool> used(static_cast<size_t>(M.rows()), false);
      for (Index c = 0; c < M.cols(); ++c) {
        Index one_row = -1;
        for (Index r = 0; r < M.rows(); ++r) {
          const double v = M(r, c);
          if (v == 1.0 && one_row < 0) one_row = r;
          else if (v != 0.0) return {};
        }
        if (one_row < 0 || used[static_cast<size_t>(one_row)]) return {};
        used[static_cast<size_t>(one_row)] = true;
        fwd[static_cast<size_t>(c)] = one_row;
      }
      perms.push_back(std::move(fwd));
    }
    return perms;
  }
};

inline GroupRepresentation GroupRepresentation::from_descriptor(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "trivial") return trivial(j.at("n").get<Index>());
  if (kind == "cyclic_shift")
    return cyclic_shift(j.at("rows").get<Index>(), j.at("cols").get<Index>());
  if (kind == "product") {
    const auto& factors = j.at("factors");
    if (!factors.is_array() || factors.size() < 2)
      throw std::invalid_argument("product descriptor needs at least two factors");
    GroupRepresentation rep = from_descriptor(factors[0]);
    const bool dedup = j.value("dedup", false);
    for (size_t i = 1; i < factors.size(); ++i)
      rep = direct_product(rep, from_descriptor(factors[i]), dedup);
    return rep;
  }
  if (kind == "explicit") {
    const Index n = j.at("n").get<Index>();
    std::vector<Eigen::MatrixXd> mats;
    for (const auto& flat : j.at("matrices")) {
      const auto vals = flat.get<std::vector<double>>();
      if (static_cast<Index>(vals.size()) != n * n)
        throw std::invalid_argument("explicit descriptor: matrix size mismatch");
      Eigen::MatrixXd M(n, n);
      for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) M(r, c) = vals[static_cast<size_t>(r * n + c)];
      mats.push_back(std::move(M));
    }
    return from_matrices(std::move(mats), j);
  }
  throw std::invalid_argument("unknown group descriptor kind: " + kind);
}

/// Cyclic column-shift representation of n1 x n2 images (paper-facing name).
inline GroupRepresentation build_cyclic_shift_rep(Index n1, Index n2) {
  return GroupRepresentation::cyclic_shift(n1, n2);
}

inline GroupRepresentation direct_product(const GroupRepresentation& a,
                                          const GroupRepresentation& b, bool dedup = false) {
  return GroupRepresentation::direct_product(a, b, dedup);
}

// ---------------------------------------------------------------------------
// GroupDictionary
// ---------------------------------------------------------------------------

/// base (n x K) together with the expanded matrix
/// [L_1*base, L_2*base, ..., L_{N_G}*base] of size n x (K*N_G).
struct GroupDictionary {
  Eigen::MatrixXd base;
  GroupRepresentation rep;
  Eigen::MatrixXd expanded;

  Index n() const { return base.rows(); }
  Index K() const { return base.cols(); }
  Index order() const { return rep.order(); }
};

/// Expanded dictionary over X, optionally with column `exclude` removed
/// (pass std::nullopt to keep all columns).
inline GroupDictionary build_group_dictionary(const Eigen::MatrixXd& X,
                                              std::optional<Index> exclude,
                                              const GroupRepresentation& rep) {
  if (X.rows() != rep.n())
    throw std::invalid_argument("build_group_dictionary: data dimension != representation dimension");
  GroupDictionary D;
  D.rep = rep;
  if (exclude) {
    const Index i = *exclude;
    if (i < 0 || i >= X.cols())
      throw std::out_of_range("build_group_dictionary: excluded column out of range");
    D.base.resize(X.rows(), X.cols() - 1);
    D.base.leftCols(i) = X.leftCols(i);
    D.base.rightCols(X.cols() - 1 - i) = X.rightCols(X.cols() - 1 - i);
  } else {
    D.base = X;
  }
  const Index K = D.base.cols();
  const Index N_G = rep.order();
  D.expanded.resize(X.rows(), K * N_G);
  for (Index g = 0; g < N_G; ++g) D.expanded.middleCols(g * K, K) = rep.apply(g, D.base);
  return D;
}

/// Keep, inside every group block of a K*N_G column layout, only the columns
/// whose base index lies in S. Works for dictionaries and coefficient layouts
/// alike; S uses 0-based base indices.
inline Eigen::MatrixXd select_group_columns(const Eigen::MatrixXd& M, Index K, Index N_G,
                                            std::span<const Index> S) {
  if (M.cols() != K * N_G)
    throw std::invalid_argument("select_group_columns: layout mismatch");
  for (Index s : S)
    if (s < 0 || s >= K) throw std::out_of_range("select_group_columns: index out of range");
  const Index m = static_cast<Index>(S.size());
  Eigen::MatrixXd out(M.rows(), m * N_G);
  for (Index g = 0; g < N_G; ++g)
    for (Index t = 0; t < m; ++t) out.col(g * m + t) = M.col(g * K + S[static_cast<size_t>(t)]);
  return out;
}

inline Eigen::MatrixXd select_group_columns(const GroupDictionary& D, std::span<const Index> S) {
  return select_group_columns(D.expanded, D.K(), D.order(), S);
}

}  // namespace ssmc
