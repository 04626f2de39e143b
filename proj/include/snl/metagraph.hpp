#pragma once

// Instance-level meta-graphs (kNN affinities split by global state), their
// Laplacians, and the node-level topology constraint matrix.

#include <algorithm>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "snl/core_model.hpp"
#include "snl/error.hpp"

namespace snl {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct MetaGraphConfig {
  int k = 10;
};

struct AffinityPair {
  SparseMatrix a_plus;   // same-state neighbors
  SparseMatrix a_minus;  // cross-state neighbors
};

struct LaplacianSet {
  Eigen::VectorXd d_plus;
  Eigen::VectorXd d_minus;
  SparseMatrix l_plus;
  SparseMatrix l_minus;
  SparseMatrix l_tilde;  // l_minus - l_plus
};

/// Laplacian of the generalized network (n x n).
struct ConstraintMatrix {
  SparseMatrix c;
};

/// a.b / (|a||b|); 0 when either vector has zero norm.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "cosine of vectors with different lengths");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::LengthMismatch, "cosine of vectors with different lengths");
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return cosine_similarity(Map(a.data(), static_cast<Eigen::Index>(a.size())),
                           Map(b.data(), static_cast<Eigen::Index>(b.size())));
}

/// Symmetric m x m matrix of pairwise column cosines (diagonal left at 0).
inline Eigen::MatrixXd pairwise_cosine(const StateMatrix& v) {
  const Eigen::Index m = v.cols();
  Eigen::VectorXd inv_norm(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double norm = v.values.col(i).norm();
    inv_norm(i) = norm == 0.0 ? 0.0 : 1.0 / norm;
  }
  const Eigen::MatrixXd gram = v.values.transpose() * v.values;
  Eigen::MatrixXd cos = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j + 1; i < m; ++i) {
      const double s = gram(i, j) * inv_norm(i) * inv_norm(j);
      cos(i, j) = s;
      cos(j, i) = s;
    }
  }
  return cos;
}

/// For each instance, the k other instances of largest cosine similarity,
/// ties to the lower index. Each list is sorted by decreasing similarity.
inline std::vector<std::vector<int>> knn_neighborhoods(const Eigen::MatrixXd& cosine, int k) {
  const int m = static_cast<int>(cosine.rows());
  if (k < 1 || k > m - 1) {
    throw Error(ErrorKind::KTooLarge, "k=" + std::to_string(k) + " needs 1 <= k <= m-1 = " + std::to_string(m - 1));
  }
  std::vector<std::vector<int>> out(static_cast<std::size_t>(m));
  std::vector<int> order;
  for (int i = 0; i < m; ++i) {
    order.clear();
    for (int j = 0; j < m; ++j) {
      if (j != i) order.push_back(j);
    }
    auto closer = [&](int a, int b) {
      if (cosine(i, a) != cosine(i, b)) return cosine(i, a) > cosine(i, b);
      return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);
    out[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + k);
  }
  return out;
}

inline std::vector<std::vector<int>> knn_neighborhoods(const StateMatrix& v, int k) {
  if (k < 1 || k > v.cols() - 1) {
    throw Error(ErrorKind::KTooLarge, "k=" + std::to_string(k) + " needs 1 <= k <= m-1 = " +
                                          std::to_string(v.cols() - 1));
  }
  return knn_neighborhoods(pairwise_cosine(v), k);
}

/// A+ / A- from the symmetric kNN relation: entry (i,j) holds cos(v_i, v_j)
/// when j in kNN(i) or i in kNN(j); it goes to A+ when labels match and to
/// A- otherwise. Negative cosines are kept as-is.
inline AffinityPair build_affinities(std::span<const int> labels, const StateMatrix& v, const MetaGraphConfig& cfg) {
  const int m = static_cast<int>(v.cols());
  if (static_cast<int>(labels.size()) != m) throw Error(ErrorKind::DimensionMismatch, "one label per column required");
  const Eigen::MatrixXd cos = pairwise_cosine(v);
  const auto knn = knn_neighborhoods(cos, cfg.k);

  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < m; ++i) {
    for (int j : knn[static_cast<std::size_t>(i)]) pairs.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<Triplet> plus;
  std::vector<Triplet> minus;
  for (const auto& [i, j] : pairs) {
    const double s = cos(i, j);
    auto& dst = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? plus : minus;
    dst.emplace_back(i, j, s);
    dst.emplace_back(j, i, s);
  }
  AffinityPair out;
  out.a_plus.resize(m, m);
  out.a_minus.resize(m, m);
  out.a_plus.setFromTriplets(plus.begin(), plus.end());
  out.a_minus.setFromTriplets(minus.begin(), minus.end());
  return out;
}

inline AffinityPair build_affinities(const NetworkDatabase& db, const StateMatrix& v, const MetaGraphConfig& cfg) {
  return build_affinities(db.labels(), v, cfg);
}

inline bool is_exactly_symmetric(const SparseMatrix& a) {
  if (a.rows() != a.cols()) return false;
  const SparseMatrix t = a.transpose();
  const SparseMatrix diff = a - t;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
      if (it.value() != 0.0) return false;
    }
  }
  return true;
}

/// Degree vector D (row sums of A) and L = D - A.
inline std::pair<Eigen::VectorXd, SparseMatrix> laplacian(const SparseMatrix& a) {
  if (!is_exactly_symmetric(a)) throw Error(ErrorKind::AsymmetricInput, "Laplacian needs a symmetric matrix");
  const Eigen::Index m = a.rows();
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(m);
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(a.nonZeros() + m));
  for (int col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      degree(it.row()) += it.value();
      entries.emplace_back(static_cast<int>(it.row()), col, -it.value());
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (degree(i) != 0.0) entries.emplace_back(static_cast<int>(i), static_cast<int>(i), degree(i));
  }
  SparseMatrix l(m, m);
  l.setFromTriplets(entries.begin(), entries.end());
  l.prune(0.0);
  return {degree, l};
}

inline LaplacianSet build_laplacians(const AffinityPair& aff) {
  LaplacianSet set;
  std::tie(set.d_plus, set.l_plus) = laplacian(aff.a_plus);
  std::tie(set.d_minus, set.l_minus) = laplacian(aff.a_minus);
  set.l_tilde = set.l_minus - set.l_plus;
  return set;
}

/// C_pp = sum_q K(p,q), C_pq = -K(p,q) on generalized edges.
inline ConstraintMatrix build_constraint_matrix(const GeneralizedNetwork& g) {
  std::vector<Triplet> entries;
  entries.reserve(g.edges.size() * 2 + static_cast<std::size_t>(g.n));
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(g.n);
  for (const auto& e : g.edges) {
    entries.emplace_back(e.p, e.q, -e.weight);
    entries.emplace_back(e.q, e.p, -e.weight);
    degree(e.p) += e.weight;
    degree(e.q) += e.weight;
  }
  for (int p = 0; p < g.n; ++p) {
    if (degree(p) != 0.0) entries.emplace_back(p, p, degree(p));
  }
  ConstraintMatrix out;
  out.c.resize(g.n, g.n);
  out.c.setFromTriplets(entries.begin(), entries.end());
  return out;
}

}  // namespace snl
