#pragma once

// Cross-validated evaluation of the learned subspace: stratified folds, a
// linear hinge-loss classifier in the embedded space, nested alpha
// selection, and ROC/AUC of node rankings against a ground-truth set.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <span>
#include <tuple>
#include <exception>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "snl/core_model.hpp"
#include "snl/error.hpp"
#include "snl/metagraph.hpp"
#include "snl/rng.hpp"
#include "snl/selection.hpp"
#include "snl/spectral_solver.hpp"
#include "snl/tsv.hpp"

namespace snl {

// ---------------------------------------------------------------------------
// Folds

/// Fold index per instance. Each class is shuffled and dealt round-robin,
/// continuing the rotation across classes, so every fold holds floor or
/// ceil of its proportional share of each class. folds == m gives
/// leave-one-out in instance order.
inline std::vector<int> stratified_folds(std::span<const int> labels, int folds, std::uint64_t seed) {
  const int m = static_cast<int>(labels.size());
  if (folds < 2) throw Error(ErrorKind::ConfigInvalid, "need at least 2 folds");
  std::vector<int> assignment(static_cast<std::size_t>(m), 0);
  if (folds == m) {
    std::iota(assignment.begin(), assignment.end(), 0);
    return assignment;
  }
  std::map<int, std::vector<int>> by_class;
  for (int i = 0; i < m; ++i) by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
  for (const auto& [label, members] : by_class) {
    if (static_cast<int>(members.size()) < folds) {
      throw Error(ErrorKind::TooFewPerClass, "class " + std::to_string(label) + " has " +
                                                 std::to_string(members.size()) + " members for " +
                                                 std::to_string(folds) + " folds");
    }
  }
  Rng rng = substream(seed, "folds");
  int offset = 0;
  for (auto& [label, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      assignment[static_cast<std::size_t>(members[j])] = (offset + static_cast<int>(j)) % folds;
    }
    offset = (offset + static_cast<int>(members.size())) % folds;
  }
  return assignment;
}

// ---------------------------------------------------------------------------
// Linear classifier

struct ClassifierConfig {
  double lambda = 1e-3;  // quadratic weight penalty
  int epochs = 400;
  double step = 0.5;     // step_t = step / sqrt(t + 1)
};

/// Hinge-loss linear model on standardized features; one-vs-rest when
/// there are more than two classes.
struct LinearClassifier {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  Eigen::MatrixXd weights;  // d x (1 for binary, K otherwise)
  Eigen::VectorXd bias;
  int num_classes = 2;
  std::vector<std::vector<double>> loss_history;  // best-so-far objective per epoch, per sub-model

  Eigen::VectorXd decision(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = (x - mean).cwiseQuotient(scale);
    return weights.transpose() * z + bias;
  }

  int predict(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd s = decision(x);
    if (num_classes == 2) return s(0) > 0.0 ? 1 : 0;
    Eigen::Index arg = 0;
    s.maxCoeff(&arg);
    return static_cast<int>(arg);
  }

  std::vector<int> predict_all(const Eigen::MatrixXd& points) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index i = 0; i < points.cols(); ++i) out.push_back(predict(points.col(i)));
    return out;
  }
};

namespace detail {

inline double hinge_objective(const Eigen::MatrixXd& z, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                              double lambda) {
  const Eigen::ArrayXd margins = 1.0 - y.array() * ((z.transpose() * w).array() + b);
  return 0.5 * lambda * w.squaredNorm() + margins.max(0.0).mean();
}

/// Full-batch subgradient descent with iterate averaging; returns the
/// averaged iterate of lowest objective.
inline std::pair<Eigen::VectorXd, double> train_binary(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                                       const ClassifierConfig& cfg, std::vector<double>& history) {
  const Eigen::Index dim = z.rows();
  const double count = static_cast<double>(z.cols());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  double b = 0.0;
  Eigen::VectorXd w_avg = w;
  double b_avg = b;
  Eigen::VectorXd w_best = w;
  double b_best = b;
  double best = hinge_objective(z, y, w, b, cfg.lambda);
  history.clear();
  for (int t = 0; t < cfg.epochs; ++t) {
    const Eigen::ArrayXd margin = y.array() * ((z.transpose() * w).array() + b);
    const Eigen::ArrayXd active = (margin < 1.0).cast<double>() * y.array();
    const Eigen::VectorXd grad_w = cfg.lambda * w - z * active.matrix() / count;
    const double grad_b = -active.sum() / count;
    const double eta = cfg.step / std::sqrt(static_cast<double>(t) + 1.0);
    w -= eta * grad_w;
    b -= eta * grad_b;
    const double weight = 1.0 / (static_cast<double>(t) + 1.0);
    w_avg += weight * (w - w_avg);
    b_avg += weight * (b - b_avg);
    for (const auto& [cand_w, cand_b] : {std::pair<const Eigen::VectorXd*, double>{&w_avg, b_avg}, {&w, b}}) {
      const double obj = hinge_objective(z, y, *cand_w, cand_b, cfg.lambda);
      if (obj < best) {
        best = obj;
        w_best = *cand_w;
        b_best = cand_b;
      }
    }
    history.push_back(best);
  }
  return {w_best, b_best};
}

}  // namespace detail

/// `points` is d x m_train; labels are dense class indices.
inline LinearClassifier train_linear_classifier(const Eigen::MatrixXd& points, std::span<const int> labels,
                                                const ClassifierConfig& cfg = {}) {
  if (points.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw Error(ErrorKind::DimensionMismatch, "one label per point required");
  }
  const int num_classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> present(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int l : labels) {
    if (l < 0) throw Error(ErrorKind::ConfigInvalid, "labels must be dense class indices");
    present[static_cast<std::size_t>(l)] = 1;
  }
  if (std::accumulate(present.begin(), present.end(), 0) < 2) {
    throw Error(ErrorKind::SingleClassFold, "training data holds a single class");
  }

  LinearClassifier model;
  model.num_classes = std::max(num_classes, 2);
  const Eigen::Index dim = points.rows();
  model.mean = points.rowwise().mean();
  const Eigen::MatrixXd centered = points.colwise() - model.mean;
  model.scale = (centered.array().square().rowwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < dim; ++j) {
    if (!(model.scale(j) > 1e-300)) model.scale(j) = 1.0;
  }
  const Eigen::MatrixXd z = model.scale.cwiseInverse().asDiagonal() * centered;

  const int sub_models = model.num_classes == 2 ? 1 : model.num_classes;
  model.weights.resize(dim, sub_models);
  model.bias.resize(sub_models);
  model.loss_history.resize(static_cast<std::size_t>(sub_models));
  for (int s = 0; s < sub_models; ++s) {
    const int positive = model.num_classes == 2 ? 1 : s;
    Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i] == positive ? 1.0 : -1.0;
    auto [w, b] = detail::train_binary(z, y, cfg, model.loss_history[static_cast<std::size_t>(s)]);
    model.weights.col(s) = w;
    model.bias(s) = b;
  }
  return model;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw Error(ErrorKind::LengthMismatch, "accuracy inputs");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// ROC / AUC

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct AucResult {
  double auc = 0.5;
  std::vector<RocPoint> roc;
};

/// Mann-Whitney AUC of `scores` with ground-truth membership as positive;
/// tied scores count one half. ROC has one point per distinct score.
inline AucResult ranking_auc(const Eigen::VectorXd& scores, const std::vector<int>& gt_nodes) {
  const Eigen::Index n = scores.size();
  std::vector<bool> positive(static_cast<std::size_t>(n), false);
  for (int p : gt_nodes) {
    if (p < 0 || p >= n) throw Error(ErrorKind::DegenerateGroundTruth, "ground-truth node out of range");
    positive[static_cast<std::size_t>(p)] = true;
  }
  const auto num_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const double num_neg = static_cast<double>(n) - num_pos;
  if (num_pos == 0 || num_neg == 0) {
    throw Error(ErrorKind::DegenerateGroundTruth, "ground truth must be a proper non-empty subset of nodes");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });

  AucResult out;
  out.roc.push_back({0.0, 0.0});
  double tp = 0;
  double fp = 0;
  double area = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double group_pos = 0;
    double group_neg = 0;
    while (j < order.size() && scores(order[j]) == scores(order[i])) {
      (positive[static_cast<std::size_t>(order[j])] ? group_pos : group_neg) += 1;
      ++j;
    }
    // Positives in this tie group beat negatives ranked below and half of
    // the negatives tied with them.
    area += group_pos * (num_neg - fp - group_neg) + 0.5 * group_pos * group_neg;
    tp += group_pos;
    fp += group_neg;
    out.roc.push_back({fp / num_neg, tp / num_pos});
    i = j;
  }
  out.auc = area / (num_pos * num_neg);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct EvalConfig {
  int folds = 10;
  int inner_folds = 5;
  std::vector<double> alpha_grid{0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.5};
  MetaGraphConfig graph{};
  SelectionConfig selection{};
  ClassifierConfig classifier{};
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    if (folds < 2) throw Error(ErrorKind::ConfigInvalid, "need at least 2 folds");
    if (inner_folds < 2) throw Error(ErrorKind::ConfigInvalid, "need at least 2 inner folds");
    if (alpha_grid.empty()) throw Error(ErrorKind::ConfigInvalid, "alpha grid is empty");
    for (double a : alpha_grid) {
      if (!(a >= 0.0) || !std::isfinite(a)) throw Error(ErrorKind::ConfigInvalid, "alpha values must be >= 0");
    }
    if (threads < 1) throw Error(ErrorKind::ConfigInvalid, "threads must be >= 1");
  }
};

struct EvalReport {
  std::vector<double> fold_accuracy;
  std::vector<double> fold_alpha;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  double best_alpha = 0.0;
  std::optional<double> auc;
  std::vector<RocPoint> roc;
};

namespace detail {

/// Runs body(i) for i in [0, count) on up to `threads` workers.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  const int workers = std::min(threads, count);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Train/test split of one fold.
struct FoldSplit {
  std::vector<int> train;
  std::vector<int> test;
};

inline std::vector<FoldSplit> make_splits(const std::vector<int>& assignment, int folds) {
  std::vector<FoldSplit> splits(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    for (int f = 0; f < folds; ++f) {
      (assignment[i] == f ? splits[static_cast<std::size_t>(f)].test : splits[static_cast<std::size_t>(f)].train)
          .push_back(static_cast<int>(i));
    }
  }
  return splits;
}

/// A fold whose alpha-independent work (meta-graphs, basis, reduced
/// matrices) is done once from training instances only.
class PreparedFold {
 public:
  PreparedFold(const NetworkDatabase& db, const StateMatrix& v_all, const FoldSplit& split, const EvalConfig& cfg,
               const SolverConfig& solver)
      : train_db_(subset_instances(db, split.train)),
        problem_(prepare_problem(train_db_, cfg.graph, solver)),
        classifier_cfg_(cfg.classifier) {
    v_train_ = columns(v_all, split.train);
    v_test_ = columns(v_all, split.test);
    train_labels_ = train_db_.labels();
    // Test labels in the training database's dense label space.
    for (int i : split.test) {
      const int raw = db.instance(i).global_state;
      const auto& states = train_db_.states();
      const auto it = std::lower_bound(states.begin(), states.end(), raw);
      test_labels_.push_back(it != states.end() && *it == raw ? static_cast<int>(it - states.begin()) : -1);
    }
  }

  SpectralModel model(double alpha) const { return problem_.solve(alpha); }

  double accuracy_at(double alpha) const {
    const SpectralModel m = model(alpha);
    const Eigen::MatrixXd train_points = transform(m, v_train_);
    const Eigen::MatrixXd test_points = transform(m, v_test_);
    const LinearClassifier clf = train_linear_classifier(train_points, train_labels_, classifier_cfg_);
    return accuracy(clf.predict_all(test_points), test_labels_);
  }

  const NetworkDatabase& train_database() const { return train_db_; }

 private:
  static StateMatrix columns(const StateMatrix& v, const std::vector<int>& cols) {
    StateMatrix out{Eigen::MatrixXd(v.rows(), static_cast<Eigen::Index>(cols.size()))};
    for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = v.values.col(cols[j]);
    return out;
  }

  NetworkDatabase train_db_;
  PreparedProblem problem_;
  ClassifierConfig classifier_cfg_;
  StateMatrix v_train_;
  StateMatrix v_test_;
  std::vector<int> train_labels_;
  std::vector<int> test_labels_;
};

/// Per-fold accuracy for every alpha in the grid (no nested selection):
/// result[a][f].
inline std::vector<std::vector<double>> cv_alpha_curve(const NetworkDatabase& db, const EvalConfig& cfg,
                                                       const SolverConfig& solver, int folds, std::uint64_t seed,
                                                       int threads) {
  const auto assignment = stratified_folds(db.labels(), folds, seed);
  const auto splits = make_splits(assignment, folds);
  const StateMatrix v = assemble_state_matrix(db);
  std::vector<std::vector<double>> acc(cfg.alpha_grid.size(), std::vector<double>(static_cast<std::size_t>(folds)));
  detail::parallel_for(folds, threads, [&](int f) {
    const PreparedFold fold(db, v, splits[static_cast<std::size_t>(f)], cfg, solver);
    for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
      acc[a][static_cast<std::size_t>(f)] = fold.accuracy_at(cfg.alpha_grid[a]);
    }
  });
  return acc;
}

/// Alpha of highest inner-CV mean accuracy on `train_db`, ties to the
/// smaller alpha.
inline double select_alpha(const NetworkDatabase& train_db, const EvalConfig& cfg, const SolverConfig& solver,
                           std::uint64_t seed) {
  if (cfg.alpha_grid.size() == 1) return cfg.alpha_grid.front();
  std::map<int, int> counts;
  for (int l : train_db.labels()) ++counts[l];
  int smallest = train_db.m();
  for (const auto& [label, count] : counts) smallest = std::min(smallest, count);
  const int inner = std::min(cfg.inner_folds, smallest);
  if (inner < 2) return *std::min_element(cfg.alpha_grid.begin(), cfg.alpha_grid.end());

  const auto curve = cv_alpha_curve(train_db, cfg, solver, inner, seed, 1);
  double best_alpha = 0.0;
  double best_acc = -1.0;
  for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
    const double mean = detail::mean_sd(curve[a]).first;
    const double alpha = cfg.alpha_grid[a];
    if (mean > best_acc || (mean == best_acc && alpha < best_alpha)) {
      best_acc = mean;
      best_alpha = alpha;
    }
  }
  return best_alpha;
}

/// Most frequently selected alpha, ties to the smaller value.
inline double modal_alpha(const std::vector<double>& alphas) {
  std::map<double, int> counts;
  for (double a : alphas) ++counts[a];
  double best = alphas.front();
  int best_count = 0;
  for (const auto& [a, c] : counts) {
    if (c > best_count) {
      best = a;
      best_count = c;
    }
  }
  return best;
}

/// Outer stratified k-fold CV with nested alpha selection per fold. When
/// `gt_nodes` is given, the AUC is that of the model fit on the whole
/// database at the modal selected alpha.
inline EvalReport run_cv(const NetworkDatabase& db, const EvalConfig& cfg, const SolverConfig& solver,
                         const std::optional<std::vector<int>>& gt_nodes = std::nullopt) {
  cfg.validate();
  solver.validate();
  const auto assignment = stratified_folds(db.labels(), cfg.folds, cfg.seed);
  const auto splits = make_splits(assignment, cfg.folds);
  const StateMatrix v = assemble_state_matrix(db);

  EvalReport report;
  report.fold_accuracy.assign(static_cast<std::size_t>(cfg.folds), 0.0);
  report.fold_alpha.assign(static_cast<std::size_t>(cfg.folds), 0.0);
  detail::parallel_for(cfg.folds, cfg.threads, [&](int f) {
    const auto& split = splits[static_cast<std::size_t>(f)];
    const PreparedFold fold(db, v, split, cfg, solver);
    const double alpha =
        select_alpha(fold.train_database(), cfg, solver, detail::mix_seed(cfg.seed, static_cast<std::uint64_t>(f)));
    report.fold_alpha[static_cast<std::size_t>(f)] = alpha;
    report.fold_accuracy[static_cast<std::size_t>(f)] = fold.accuracy_at(alpha);
  });
  std::tie(report.mean_accuracy, report.sd_accuracy) = detail::mean_sd(report.fold_accuracy);
  report.best_alpha = modal_alpha(report.fold_alpha);

  if (gt_nodes) {
    SolverConfig full = solver;
    full.alpha = report.best_alpha;
    const SpectralModel model = fit_model(db, cfg.graph, full);
    const AucResult auc = ranking_auc(score_nodes(model.u_matrix), *gt_nodes);
    report.auc = auc.auc;
    report.roc = auc.roc;
  }
  return report;
}

struct SweepRow {
  double alpha = 0.0;
  double mean_accuracy = 0.0;
  double sd_accuracy = 0.0;
  std::optional<double> auc;
};

/// Plain (non-nested) CV accuracy and full-data node-ranking AUC per alpha.
inline std::vector<SweepRow> sweep_alpha(const NetworkDatabase& db, const EvalConfig& cfg, const SolverConfig& solver,
                                         const std::optional<std::vector<int>>& gt_nodes = std::nullopt) {
  cfg.validate();
  solver.validate();
  const auto curve = cv_alpha_curve(db, cfg, solver, cfg.folds, cfg.seed, cfg.threads);
  std::optional<PreparedProblem> full;
  if (gt_nodes) full = prepare_problem(db, cfg.graph, solver);
  std::vector<SweepRow> rows;
  for (std::size_t a = 0; a < cfg.alpha_grid.size(); ++a) {
    SweepRow row;
    row.alpha = cfg.alpha_grid[a];
    std::tie(row.mean_accuracy, row.sd_accuracy) = detail::mean_sd(curve[a]);
    if (full) row.auc = ranking_auc(score_nodes(full->solve(row.alpha).u_matrix), *gt_nodes).auc;
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report files

namespace files {
inline constexpr const char* kEvalReport = "report.json";
inline constexpr const char* kFolds = "folds.tsv";
inline constexpr const char* kRoc = "roc.tsv";
inline constexpr const char* kSweep = "sweep.tsv";
}  // namespace files

inline void write_eval_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json j;
  j["folds"] = report.fold_accuracy.size();
  j["fold_accuracy"] = report.fold_accuracy;
  j["fold_alpha"] = report.fold_alpha;
  j["mean_accuracy"] = report.mean_accuracy;
  j["sd_accuracy"] = report.sd_accuracy;
  j["best_alpha"] = report.best_alpha;
  if (report.auc) j["auc"] = *report.auc;
  tsv::write_file(dir / files::kEvalReport, j.dump(2) + "\n");

  std::string folds = "fold\talpha\taccuracy\n";
  for (std::size_t f = 0; f < report.fold_accuracy.size(); ++f) {
    folds += std::to_string(f + 1) + "\t" + tsv::format_shortest(report.fold_alpha[f]) + "\t" +
             tsv::format_17g(report.fold_accuracy[f]) + "\n";
  }
  tsv::write_file(dir / files::kFolds, folds);

  if (report.auc) {
    std::string roc = "fpr\ttpr\n";
    for (const auto& p : report.roc) roc += tsv::format_17g(p.fpr) + "\t" + tsv::format_17g(p.tpr) + "\n";
    tsv::write_file(dir / files::kRoc, roc);
  }
}

inline std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::string out = "alpha\tmean_accuracy\tsd_accuracy\tauc\n";
  for (const auto& r : rows) {
    out += tsv::format_shortest(r.alpha) + "\t" + tsv::format_17g(r.mean_accuracy) + "\t" +
           tsv::format_17g(r.sd_accuracy) + "\t" + (r.auc ? tsv::format_17g(*r.auc) : std::string()) + "\n";
  }
  return out;
}

}  // namespace snl
