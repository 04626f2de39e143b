// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
// The process exits 0 once every check has run; individual failures are
// reported on their lines and in the closing tally.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "snl/snl.hpp"
#include "test_util.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int passed = 0;
int total = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  ++total;
  passed += ok ? 1 : 0;
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// Small random database with a random edge set per instance.
snl::NetworkDatabase random_database(int n, int m, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.3, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd values(n, m);
  for (Eigen::Index i = 0; i < values.size(); ++i) values.data()[i] = g(rng);
  std::vector<int> labels(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) labels[static_cast<std::size_t>(i)] = i % 2;
  std::shuffle(labels.begin(), labels.end(), rng);
  const double density = 0.2 + 0.6 * unit(rng);
  std::vector<std::vector<snl::Edge>> edges(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (unit(rng) < density) edges[static_cast<std::size_t>(i)].push_back({p, q});
      }
    }
  }
  return snl::testing::make_database(values, labels, edges);
}

struct Pieces {
  snl::StateMatrix v;
  snl::LaplacianSet lap;
  snl::ConstraintMatrix c;
};

Pieces pieces(const snl::NetworkDatabase& db, int k) {
  Pieces out;
  out.v = snl::assemble_state_matrix(db);
  out.lap = snl::build_laplacians(snl::build_affinities(db, out.v, {k}));
  out.c = snl::build_constraint_matrix(snl::build_generalized_network(db));
  return out;
}

void criterion_solver_optimality() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> n_dist(3, 10);
  std::uniform_int_distribution<int> m_dist(6, 20);
  std::uniform_real_distribution<double> alpha_dist(0.0, 6.5);
  std::normal_distribution<double> g;
  int instances = 0;
  int good = 0;
  double worst_gap = std::numeric_limits<double>::infinity();
  while (instances < 50) {
    const int n = n_dist(rng);
    const int m = m_dist(rng);
    const auto db = random_database(n, m, rng);
    const int k = std::uniform_int_distribution<int>(1, m / 2 - 1)(rng);
    const Pieces pc = pieces(db, k);
    const double alpha = alpha_dist(rng);
    snl::TruncatedBasis basis;
    try {
      basis = snl::truncated_svd_basis(pc.v, pc.lap.d_plus, 0.95);
    } catch (const snl::Error&) {
      continue;  // D+ vanished (no same-state neighbors); redraw
    }
    ++instances;
    const Eigen::MatrixXd a =
        pc.v.values * Eigen::MatrixXd(pc.lap.l_tilde) * pc.v.values.transpose() - alpha * Eigen::MatrixXd(pc.c.c);
    const Eigen::MatrixXd b = pc.v.values * pc.lap.d_plus.asDiagonal() * pc.v.values.transpose();
    const auto model = snl::solve_spectral(snl::assemble_objective_matrix(pc.v, pc.lap, pc.c, alpha), basis, 1, alpha);
    const Eigen::VectorXd u = model.u_matrix.col(0);
    const double objective = u.dot(a * u) / u.dot(b * u);
    double sampled = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd z(basis.r);
    for (int s = 0; s < 100000; ++s) {
      for (int j = 0; j < basis.r; ++j) z(j) = g(rng);
      const Eigen::VectorXd x = basis.p_r * z;
      sampled = std::max(sampled, x.dot(a * x) / x.dot(b * x));
    }
    const double gap = objective - sampled;
    worst_gap = std::min(worst_gap, gap);
    good += gap >= -1e-9 ? 1 : 0;
  }
  const double elapsed = seconds_since(start);
  report(1, "solver optimality", good == 50 && elapsed < 10.0,
         std::to_string(good) + "/50 instances beat 1e5 samples, worst gap " + fmt("%.3e", worst_gap) + ", " +
             fmt("%.2f s", elapsed));
}

void criterion_laplacian_identity() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> g;
  double worst = 0.0;
  double lowest = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 15;
    const auto db = random_database(n, 4 + trial % 7, rng);
    const auto net = snl::build_generalized_network(db);
    const auto c = snl::build_constraint_matrix(net);
    Eigen::VectorXd u(n);
    for (int p = 0; p < n; ++p) u(p) = g(rng);
    const double quad = u.dot(c.c * u);
    // Half of the ordered-pair double sum equals the sum over edges.
    double pair_sum = 0.0;
    for (const auto& e : net.edges) {
      const double d = u(e.p) - u(e.q);
      pair_sum += 2.0 * e.weight * d * d;
    }
    worst = std::max(worst, std::abs(quad - 0.5 * pair_sum));
    lowest = std::min(lowest, quad);
  }
  report(2, "Laplacian identities", worst <= 1e-10 && lowest >= -1e-12,
         "max |u'Cu - half pair sum| " + fmt("%.3e", worst) + ", min u'Cu " + fmt("%.3e", lowest));
}

void criterion_basis_contracts() {
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g;
  double worst_orth = 0.0;
  double worst_proj = 0.0;
  int cases = 0;
  for (int trial = 0; trial < 40; ++trial) {
    snl::NetworkDatabase db = [&] {
      if (trial % 2 == 0) return random_database(4 + trial % 7, 10 + trial % 11, rng);
      snl::SynthConfig cfg;
      cfg.n = 80;
      cfg.m = 60;
      cfg.n_gt = 10;
      cfg.edges_per_node = 4;
      cfg.seed = static_cast<std::uint64_t>(trial);
      return snl::sample_database(snl::generate_backbone(cfg), cfg);
    }();
    const Pieces pc = pieces(db, std::min(5, db.m() / 2 - 1));
    snl::TruncatedBasis basis;
    try {
      basis = snl::truncated_svd_basis(pc.v, pc.lap.d_plus, 0.95);
    } catch (const snl::Error&) {
      continue;
    }
    ++cases;
    const Eigen::MatrixXd gram = basis.p_r.transpose() * basis.p_r;
    worst_orth = std::max(worst_orth, (gram - Eigen::MatrixXd::Identity(basis.r, basis.r)).cwiseAbs().maxCoeff());
    const Eigen::MatrixXd b_r =
        basis.p_r * basis.sigma_r.array().square().matrix().asDiagonal() * basis.p_r.transpose();
    const Eigen::MatrixXd b_star =
        basis.p_r * basis.sigma_r.array().square().inverse().matrix().asDiagonal() * basis.p_r.transpose();
    for (int s = 0; s < 20; ++s) {
      Eigen::VectorXd z(basis.r);
      for (int j = 0; j < basis.r; ++j) z(j) = g(rng);
      const Eigen::VectorXd x = basis.p_r * z;
      worst_proj = std::max(worst_proj, (b_r * (b_star * x) - x).norm() / x.norm());
    }
  }
  report(3, "truncated-basis contracts", worst_orth <= 1e-10 && worst_proj <= 1e-8,
         std::to_string(cases) + " bases, max |P'P - I| " + fmt("%.3e", worst_orth) + ", max projector residual " +
             fmt("%.3e", worst_proj));
}

struct SeedResult {
  double accuracy = 0.0;
  double auc = 0.0;
  double seconds = 0.0;
  std::vector<double> curve;
};

std::vector<SeedResult> desk_scale_runs() {
  std::vector<SeedResult> out;
  for (int s = 0; s < 5; ++s) {
    snl::SynthConfig synth;
    synth.seed = 1000 + static_cast<std::uint64_t>(s);
    const auto gt = snl::generate_backbone(synth);
    const auto db = snl::sample_database(gt, synth);
    snl::EvalConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    SeedResult r;
    const auto start = Clock::now();
    const auto ev = snl::run_cv(db, cfg, snl::SolverConfig{}, gt.gt_nodes);
    r.seconds = seconds_since(start);
    r.accuracy = ev.mean_accuracy;
    r.auc = *ev.auc;
    for (const auto& row : snl::sweep_alpha(db, cfg, snl::SolverConfig{})) r.curve.push_back(row.mean_accuracy);
    std::printf("  seed %d: accuracy %.4f, AUC %.4f, best alpha %g, %.1f s; alpha curve", s, r.accuracy, r.auc,
                ev.best_alpha, r.seconds);
    for (double a : r.curve) std::printf(" %.3f", a);
    std::printf("\n");
    out.push_back(r);
  }
  return out;
}

void criteria_desk_scale() {
  const auto runs = desk_scale_runs();
  double acc = 0.0, auc = 0.0, slowest = 0.0;
  int improves = 0, not_last = 0;
  for (const auto& r : runs) {
    acc += r.accuracy / 5.0;
    auc += r.auc / 5.0;
    slowest = std::max(slowest, r.seconds);
    const double best = *std::max_element(r.curve.begin(), r.curve.end());
    improves += best > r.curve.front() ? 1 : 0;
    not_last += r.curve.back() < best ? 1 : 0;
  }
  report(4, "desk-scale accuracy", acc >= 0.65 && slowest < 120.0,
         "mean nested-CV accuracy " + fmt("%.4f", acc) + " (>= 0.65), slowest seed " + fmt("%.1f s", slowest));
  report(5, "ground-truth recovery", auc >= 0.70, "mean AUC " + fmt("%.4f", auc) + " (>= 0.70)");
  report(6, "alpha-curve shape", improves >= 4 && not_last >= 4,
         "max exceeds alpha=0.1 in " + std::to_string(improves) + "/5, alpha=6.5 below max in " +
             std::to_string(not_last) + "/5 (need 4 each)");
}

void criterion_permutation() {
  double total_acc = 0.0;
  double lo = 1.0, hi = 0.0;
  for (int s = 0; s < 20; ++s) {
    snl::SynthConfig synth;
    synth.seed = 3000 + static_cast<std::uint64_t>(s);
    const auto db = snl::sample_database(snl::generate_backbone(synth), synth);
    std::vector<int> raw;
    for (const auto& inst : db.instances()) raw.push_back(inst.global_state);
    snl::Rng rng = snl::substream(synth.seed, "permutation");
    std::shuffle(raw.begin(), raw.end(), rng);
    snl::EvalConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(s);
    const double a = snl::run_cv(snl::with_global_states(db, raw), cfg, snl::SolverConfig{}).mean_accuracy;
    total_acc += a;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  const double mean = total_acc / 20.0;
  report(7, "permutation baseline", mean >= 0.40 && mean <= 0.60,
         "mean accuracy over 20 shuffled seeds " + fmt("%.4f", mean) + " (range " + fmt("%.3f", lo) + ".." +
             fmt("%.3f", hi) + ")");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SNL_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism() {
  snl::testing::TempDir dir("acceptance_cli");
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const auto data = (dir / (std::string("data_") + run)).string();
    const auto eval = (dir / (std::string("eval_") + run)).string();
    ok &= run_cli("generate --nodes 300 --instances 200 --gt 20 --seed 7 --out " + data) == 0;
    ok &= run_cli("evaluate " + data + " --seed 7 --ground-truth " + data + "/ground_truth.tsv --out " + eval) == 0;
  }
  int compared = 0;
  int identical = 0;
  for (const char* prefix : {"data_", "eval_"}) {
    for (const auto& entry : std::filesystem::directory_iterator(dir / (std::string(prefix) + "a"))) {
      const auto other = dir / (std::string(prefix) + "b") / entry.path().filename().string();
      ++compared;
      identical += snl::testing::read_text(entry.path()) == snl::testing::read_text(other) ? 1 : 0;
    }
  }
  report(8, "determinism", ok && compared == 9 && identical == compared,
         std::to_string(identical) + "/" + std::to_string(compared) + " output files byte-identical");
}

void criterion_scaling() {
  std::vector<double> times;
  for (int n : {100, 200, 400}) {
    snl::SynthConfig synth;
    synth.n = n;
    synth.m = 100;
    synth.seed = 42;
    const auto db = snl::sample_database(snl::generate_backbone(synth), synth);
    double best = std::numeric_limits<double>::infinity();
    for (int rep = 0; rep < 5; ++rep) {
      const auto start = Clock::now();
      const auto model = snl::fit_model(db, {}, snl::SolverConfig{});
      best = std::min(best, seconds_since(start));
      if (model.d() != 2) best = std::numeric_limits<double>::infinity();
    }
    times.push_back(best);
  }
  const double r1 = times[1] / times[0];
  const double r2 = times[2] / times[1];
  report(9, "scaling", r1 <= 6.0 && r2 <= 6.0,
         "fit " + fmt("%.4f", times[0]) + " / " + fmt("%.4f", times[1]) + " / " + fmt("%.4f s", times[2]) +
             " at n=100/200/400, ratios " + fmt("%.2f", r1) + ", " + fmt("%.2f", r2));
}

}  // namespace

int main() {
  criterion_solver_optimality();
  criterion_laplacian_identity();
  criterion_basis_contracts();
  criteria_desk_scale();
  criterion_permutation();
  criterion_determinism();
  criterion_scaling();
  std::printf("%d/%d criteria passed\n", passed, total);
  return 0;
}
