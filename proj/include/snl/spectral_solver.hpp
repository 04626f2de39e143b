#pragma once

// Constrained spectral subspace learning.
//
// Maximizes u^T (V L~ V^T - alpha C) u subject to u^T V D+ V^T u = 1. The
// right-hand side is singular, so it is whitened through a truncated SVD
// V (D+)^{1/2} = P S Q^T and the problem is solved as the symmetric reduced
// eigenproblem M = S^-1 P^T A P S^-1 on the retained subspace. Eigenvectors
// w of M map back as u = P S^-1 w, which gives u^T B u = |w|^2 = 1.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "snl/core_model.hpp"
#include "snl/error.hpp"
#include "snl/metagraph.hpp"
#include "snl/tsv.hpp"

namespace snl {

struct SolverConfig {
  double alpha = 1.0;
  double energy_fraction = 0.95;
  int d = 0;  // 0 = number of distinct global states

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorKind::ConfigInvalid, "alpha must be >= 0");
    if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
      throw Error(ErrorKind::ConfigInvalid, "energy fraction must lie in (0, 1]");
    }
    if (d < 0) throw Error(ErrorKind::ConfigInvalid, "d must be >= 1 (or 0 for auto)");
  }
};

struct TruncatedBasis {
  Eigen::MatrixXd p_r;      // n x r, orthonormal columns
  Eigen::VectorXd sigma_r;  // r positive singular values, descending
  Eigen::VectorXd sigma_all;
  int r = 0;

  /// P_r S_r^-1, the map from reduced coordinates back to node space.
  Eigen::MatrixXd whitening() const { return p_r * sigma_r.cwiseInverse().asDiagonal(); }
};

struct SpectralModel {
  Eigen::MatrixXd u_matrix;     // n x d
  Eigen::VectorXd eigenvalues;  // descending
  TruncatedBasis basis;
  double alpha = 0.0;

  int n() const { return static_cast<int>(u_matrix.rows()); }
  int d() const { return static_cast<int>(u_matrix.cols()); }
};

/// Objective matrix A = V L~ V^T - alpha C, symmetrized.
inline Eigen::MatrixXd assemble_objective_matrix(const StateMatrix& v, const LaplacianSet& lap, const ConstraintMatrix& c,
                                                 double alpha) {
  if (lap.l_tilde.rows() != v.cols() || lap.l_tilde.cols() != v.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "L~ must be m x m");
  }
  if (c.c.rows() != v.rows() || c.c.cols() != v.rows()) throw Error(ErrorKind::DimensionMismatch, "C must be n x n");
  const Eigen::MatrixXd vl = v.values * lap.l_tilde;
  Eigen::MatrixXd a = vl * v.values.transpose();
  if (alpha != 0.0) a -= alpha * Eigen::MatrixXd(c.c);
  const Eigen::MatrixXd at = a.transpose();
  return 0.5 * (a + at);
}

/// SVD of V (D+)^{1/2}; keeps the minimal leading rank whose singular-value
/// sum reaches `energy_fraction` of the total. Singular values at or below
/// 1e-12 * sigma_max are always dropped.
inline TruncatedBasis truncated_svd_basis(const StateMatrix& v, const Eigen::VectorXd& d_plus, double energy_fraction) {
  if (d_plus.size() != v.cols()) throw Error(ErrorKind::DimensionMismatch, "D+ must have m entries");
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigInvalid, "energy fraction must lie in (0, 1]");
  }
  if ((d_plus.array() < 0.0).any()) {
    throw Error(ErrorKind::ConfigInvalid, "D+ has a negative degree; its square root is undefined");
  }
  const Eigen::MatrixXd scaled = v.values * d_plus.cwiseSqrt().asDiagonal();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeThinU);
  const Eigen::VectorXd& sigma = svd.singularValues();

  TruncatedBasis basis;
  basis.sigma_all = sigma;
  const double sigma_max = sigma.size() > 0 ? sigma(0) : 0.0;
  if (!(sigma_max > 0.0)) throw Error(ErrorKind::ZeroMatrix, "V (D+)^{1/2} has no nonzero singular value");
  const double floor = 1e-12 * sigma_max;
  Eigen::Index usable = 0;
  while (usable < sigma.size() && sigma(usable) > floor) ++usable;

  const double total = sigma.sum();
  const double target = energy_fraction * total;
  Eigen::Index r = usable;
  double running = 0.0;
  for (Eigen::Index i = 0; i < usable; ++i) {
    running += sigma(i);
    if (running >= target) {
      r = i + 1;
      break;
    }
  }
  basis.r = static_cast<int>(r);
  basis.p_r = svd.matrixU().leftCols(r);
  basis.sigma_r = sigma.head(r);
  return basis;
}

namespace detail {

/// Flip so that the largest-magnitude entry (first on ties) is positive.
inline void fix_sign(Eigen::Ref<Eigen::VectorXd> u, Eigen::Ref<Eigen::VectorXd> w) {
  Eigen::Index arg = 0;
  u.cwiseAbs().maxCoeff(&arg);
  if (u(arg) < 0.0) {
    u = -u;
    w = -w;
  }
}

inline Eigen::Index argmax_abs(const Eigen::VectorXd& u) {
  Eigen::Index arg = 0;
  u.cwiseAbs().maxCoeff(&arg);
  return arg;
}

}  // namespace detail

/// Top-d solution from a precomputed reduced matrix M = W^T A W with
/// W = P_r S_r^-1.
inline SpectralModel solve_reduced(const Eigen::MatrixXd& reduced, const TruncatedBasis& basis, int d, double alpha) {
  if (d < 1) throw Error(ErrorKind::ConfigInvalid, "d must be >= 1");
  if (d > basis.r) {
    throw Error(ErrorKind::RankDeficient,
                "d=" + std::to_string(d) + " exceeds retained rank r=" + std::to_string(basis.r));
  }
  const Eigen::MatrixXd sym = 0.5 * (reduced + reduced.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::ZeroMatrix, "reduced eigenproblem did not converge");

  const Eigen::MatrixXd w_map = basis.whitening();
  const Eigen::Index r = sym.rows();
  Eigen::MatrixXd w_all = eig.eigenvectors();
  Eigen::MatrixXd u_all = w_map * w_all;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  for (Eigen::Index j = 0; j < r; ++j) {
    order[static_cast<std::size_t>(j)] = r - 1 - j;
    detail::fix_sign(u_all.col(j), w_all.col(j));
  }

  // Descending eigenvalue order; numerically tied runs ordered by the
  // position of each vector's largest-magnitude entry.
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t end = start + 1;
    while (end < order.size() && std::abs(lam(order[end - 1]) - lam(order[end])) <= 1e-12 * scale) ++end;
    if (end - start > 1) {
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end), [&](Eigen::Index a, Eigen::Index b) {
                         return detail::argmax_abs(u_all.col(a)) < detail::argmax_abs(u_all.col(b));
                       });
    }
    start = end;
  }

  SpectralModel model;
  model.u_matrix.resize(u_all.rows(), d);
  model.eigenvalues.resize(d);
  for (int j = 0; j < d; ++j) {
    model.u_matrix.col(j) = u_all.col(order[static_cast<std::size_t>(j)]);
    model.eigenvalues(j) = lam(order[static_cast<std::size_t>(j)]);
  }
  model.basis = basis;
  model.alpha = alpha;
  return model;
}

/// Solves the whitened eigenproblem of `a` on the retained basis.
inline SpectralModel solve_spectral(const Eigen::MatrixXd& a, const TruncatedBasis& basis, int d, double alpha = 0.0) {
  if (a.rows() != a.cols() || a.rows() != basis.p_r.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "A must be n x n with n = basis rows");
  }
  if (d > basis.r) {
    throw Error(ErrorKind::RankDeficient,
                "d=" + std::to_string(d) + " exceeds retained rank r=" + std::to_string(basis.r));
  }
  const Eigen::MatrixXd w = basis.whitening();
  return solve_reduced(w.transpose() * a * w, basis, d, alpha);
}

/// Embedded coordinates U^T V (d x m).
inline Eigen::MatrixXd transform(const SpectralModel& model, const StateMatrix& v) {
  if (model.u_matrix.rows() != v.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "model has " + std::to_string(model.u_matrix.rows()) +
                                                  " nodes, data has " + std::to_string(v.rows()));
  }
  return model.u_matrix.transpose() * v.values;
}

/// The alpha-independent part of a fit: everything except the final
/// eigen-decomposition, reduced to the retained basis so that many alpha
/// values can be solved cheaply.
struct PreparedProblem {
  TruncatedBasis basis;
  Eigen::MatrixXd reduced_objective;   // W^T V L~ V^T W
  Eigen::MatrixXd reduced_constraint;  // W^T C W
  int d = 1;

  Eigen::MatrixXd reduced(double alpha) const { return reduced_objective - alpha * reduced_constraint; }

  SpectralModel solve(double alpha) const { return solve_reduced(reduced(alpha), basis, d, alpha); }
};

inline PreparedProblem prepare_problem(const NetworkDatabase& db, const MetaGraphConfig& graph_cfg,
                                       const SolverConfig& solver_cfg) {
  solver_cfg.validate();
  const StateMatrix v = assemble_state_matrix(db);
  const AffinityPair aff = build_affinities(db, v, graph_cfg);
  const LaplacianSet lap = build_laplacians(aff);
  const ConstraintMatrix c = build_constraint_matrix(build_generalized_network(db));

  PreparedProblem prep;
  prep.basis = truncated_svd_basis(v, lap.d_plus, solver_cfg.energy_fraction);
  prep.d = solver_cfg.d > 0 ? solver_cfg.d : db.num_classes();
  if (prep.d > prep.basis.r) {
    throw Error(ErrorKind::RankDeficient,
                "d=" + std::to_string(prep.d) + " exceeds retained rank r=" + std::to_string(prep.basis.r));
  }
  const Eigen::MatrixXd w = prep.basis.whitening();
  const Eigen::MatrixXd vw = v.values.transpose() * w;  // m x r
  const Eigen::MatrixXd lvw = lap.l_tilde * vw;
  prep.reduced_objective = vw.transpose() * lvw;
  prep.reduced_objective = 0.5 * (prep.reduced_objective + prep.reduced_objective.transpose()).eval();
  const Eigen::MatrixXd cw = c.c * w;
  prep.reduced_constraint = w.transpose() * cw;
  prep.reduced_constraint = 0.5 * (prep.reduced_constraint + prep.reduced_constraint.transpose()).eval();
  return prep;
}

/// Full fit on a database.
inline SpectralModel fit_model(const NetworkDatabase& db, const MetaGraphConfig& graph_cfg,
                               const SolverConfig& solver_cfg) {
  return prepare_problem(db, graph_cfg, solver_cfg).solve(solver_cfg.alpha);
}

// ---------------------------------------------------------------------------
// Serialization: model.tsv holds `node_id`, `u_1`..`u_d` at 17 significant
// digits; model.json carries alpha, d, r and the eigenvalues.

namespace files {
inline constexpr const char* kModelTable = "model.tsv";
inline constexpr const char* kModelMeta = "model.json";
}  // namespace files

inline void write_model(const SpectralModel& model, const NodeIndex& nodes, const std::filesystem::path& dir) {
  if (model.n() != nodes.size()) throw Error(ErrorKind::DimensionMismatch, "model rows != node count");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::string table = "node_id";
  for (int j = 0; j < model.d(); ++j) table += "\tu_" + std::to_string(j + 1);
  table += "\n";
  for (int p = 0; p < model.n(); ++p) {
    table += nodes.id(p);
    for (int j = 0; j < model.d(); ++j) table += "\t" + tsv::format_17g(model.u_matrix(p, j));
    table += "\n";
  }
  tsv::write_file(dir / files::kModelTable, table);

  nlohmann::ordered_json meta;
  meta["alpha"] = model.alpha;
  meta["d"] = model.d();
  meta["r"] = model.basis.r;
  meta["eigenvalues"] = std::vector<double>(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
  tsv::write_file(dir / files::kModelMeta, meta.dump(2) + "\n");
}

struct LoadedModel {
  NodeIndex nodes;
  SpectralModel model;  // basis holds only r
};

inline LoadedModel read_model(const std::filesystem::path& dir) {
  const auto meta_path = dir / files::kModelMeta;
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw Error(ErrorKind::MissingFile, meta_path.string());
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, meta_path.string() + ": " + e.what());
  }
  LoadedModel out;
  int d = 0;
  std::vector<double> eigenvalues;
  try {
    out.model.alpha = meta.at("alpha").get<double>();
    d = meta.at("d").get<int>();
    out.model.basis.r = meta.at("r").get<int>();
    eigenvalues = meta.at("eigenvalues").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, meta_path.string() + ": " + e.what());
  }
  if (d < 1 || static_cast<int>(eigenvalues.size()) != d) {
    throw Error(ErrorKind::ParseError, meta_path.string() + ": inconsistent d / eigenvalues");
  }

  std::vector<std::string> header{"node_id"};
  for (int j = 0; j < d; ++j) header.push_back("u_" + std::to_string(j + 1));
  const auto table = tsv::read(dir / files::kModelTable, header);
  std::vector<std::string> ids;
  Eigen::MatrixXd u(static_cast<Eigen::Index>(table.rows.size()), d);
  for (std::size_t p = 0; p < table.rows.size(); ++p) {
    ids.push_back(table.rows[p][0]);
    for (int j = 0; j < d; ++j) {
      u(static_cast<Eigen::Index>(p), j) =
          tsv::parse_double(table.rows[p][static_cast<std::size_t>(j + 1)], table.path, table.lines[p]);
    }
  }
  out.nodes = NodeIndex(std::move(ids));
  out.model.u_matrix = std::move(u);
  out.model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(eigenvalues.data(), d);
  return out;
}

}  // namespace snl
