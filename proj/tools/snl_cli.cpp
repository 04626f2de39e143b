// snl: command-line front end for the subnetwork learning pipeline.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snl/snl.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Flag problems found after parsing but before any computation.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelFlags {
  int k = 10;
  std::string dim = "auto";
  double energy = 0.95;
};

struct EvalFlags {
  std::vector<double> alpha_grid{0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.5};
  int folds = 10;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string ground_truth;
};

void add_model_flags(CLI::App* cmd, ModelFlags& f) {
  cmd->add_option("--k", f.k, "Nearest neighbors per instance in the meta-graphs")->capture_default_str();
  cmd->add_option("--dim", f.dim, "Subspace dimension (auto = number of global states)")->capture_default_str();
  cmd->add_option("--energy", f.energy, "Singular-value energy retained by the truncated basis")
      ->capture_default_str();
}

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
  cmd->add_option("--alpha-grid", f.alpha_grid, "Comma-separated alpha values")
      ->delimiter(',')
      ->capture_default_str();
  cmd->add_option("--folds", f.folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Fold-shuffle seed")->capture_default_str();
  cmd->add_option("--threads", f.threads, "Worker threads")->capture_default_str();
  cmd->add_option("--ground-truth", f.ground_truth, "ground_truth.tsv for node-ranking AUC")
      ->check(CLI::ExistingFile);
}

/// Runs `fn`, turning snl::Error into UsageError.
template <typename Fn>
void check_flags(Fn&& fn) {
  try {
    fn();
  } catch (const snl::Error& e) {
    throw UsageError(e.what());
  }
}

snl::SolverConfig solver_config(const ModelFlags& f, double alpha) {
  snl::SolverConfig cfg;
  cfg.alpha = alpha;
  cfg.energy_fraction = f.energy;
  if (f.dim != "auto") {
    int d = 0;
    const auto [ptr, ec] = std::from_chars(f.dim.data(), f.dim.data() + f.dim.size(), d);
    if (ec != std::errc() || ptr != f.dim.data() + f.dim.size() || d < 1) {
      throw UsageError("--dim must be 'auto' or a positive integer, got '" + f.dim + "'");
    }
    cfg.d = d;
  }
  if (f.k < 1) throw UsageError("--k must be >= 1");
  check_flags([&] { cfg.validate(); });
  return cfg;
}

snl::EvalConfig eval_config(const ModelFlags& m, const EvalFlags& f) {
  snl::EvalConfig cfg;
  cfg.folds = f.folds;
  cfg.alpha_grid = f.alpha_grid;
  cfg.graph.k = m.k;
  cfg.seed = f.seed;
  cfg.threads = f.threads;
  check_flags([&] { cfg.validate(); });
  return cfg;
}

std::optional<std::vector<int>> load_ground_truth(const EvalFlags& f, const snl::NetworkDatabase& db) {
  if (f.ground_truth.empty()) return std::nullopt;
  return snl::read_ground_truth(f.ground_truth, db.nodes());
}

std::string fixed(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, x);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative subnetwork learning on global-state network databases"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");

  // generate
  snl::SynthConfig synth;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset with ground truth");
  gen->add_option("--nodes", synth.n, "Node count")->capture_default_str();
  gen->add_option("--instances", synth.m, "Instance count")->capture_default_str();
  gen->add_option("--gt", synth.n_gt, "Ground-truth node count")->capture_default_str();
  gen->add_option("--edges-per-node", synth.edges_per_node, "Preferential-attachment edges per new node")
      ->capture_default_str();
  gen->add_option("--global-noise", synth.global_noise, "Label flip rate")->capture_default_str();
  gen->add_option("--local-noise", synth.local_noise, "Ground-truth value replacement rate")->capture_default_str();
  gen->add_option("--effect-size", synth.effect_size, "Class-1 mean of ground-truth values (sd 1)")
      ->capture_default_str();
  gen->add_option("--value-scale", synth.value_scale, "Multiplier applied to all node values")
      ->capture_default_str();
  gen->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset directory")->required();

  // fit
  ModelFlags fit_flags;
  double fit_alpha = 1.0;
  std::string fit_data, fit_out;
  auto* fit = app.add_subcommand("fit", "Learn the node transformation and write the model");
  fit->add_option("dataset", fit_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  add_model_flags(fit, fit_flags);
  fit->add_option("--alpha", fit_alpha, "Topology constraint weight")->capture_default_str();
  fit->add_option("--out", fit_out, "Output model directory")->required();

  // transform
  std::string tr_data, tr_model, tr_out;
  auto* tr = app.add_subcommand("transform", "Embed instances with a fitted model");
  tr->add_option("dataset", tr_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--model", tr_model, "Model directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "Output directory for embedding.tsv")->required();

  // select
  snl::SelectionConfig sel_cfg;
  std::string sel_data, sel_model, sel_out, sel_gt;
  auto* sel = app.add_subcommand("select", "Rank nodes and extract discriminative subnetworks");
  sel->add_option("dataset", sel_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sel->add_option("--model", sel_model, "Model directory")->required()->check(CLI::ExistingDirectory);
  sel->add_option("--top-c", sel_cfg.c, "Nodes to keep")->capture_default_str();
  sel->add_option("--min-edge-weight", sel_cfg.min_edge_weight, "Ignore generalized edges below this weight")
      ->capture_default_str();
  sel->add_option("--ground-truth", sel_gt, "ground_truth.tsv for node-ranking AUC")->check(CLI::ExistingFile);
  sel->add_option("--out", sel_out, "Output report directory")->required();

  // evaluate
  ModelFlags ev_model;
  EvalFlags ev_flags;
  std::optional<double> ev_alpha;
  std::string ev_data, ev_out;
  auto* ev = app.add_subcommand("evaluate", "Cross-validated accuracy with nested alpha selection");
  ev->add_option("dataset", ev_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  add_model_flags(ev, ev_model);
  add_eval_flags(ev, ev_flags);
  auto* ev_alpha_opt = ev->add_option("--alpha", ev_alpha, "Fixed alpha (skips the grid search)");
  ev_alpha_opt->excludes(ev->get_option("--alpha-grid"));
  ev->add_option("--out", ev_out, "Output report directory")->required();

  // sweep-alpha
  ModelFlags sw_model;
  EvalFlags sw_flags;
  std::string sw_data, sw_out;
  auto* sw = app.add_subcommand("sweep-alpha", "Cross-validated accuracy and AUC for every alpha in the grid");
  sw->add_option("dataset", sw_data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  add_model_flags(sw, sw_model);
  add_eval_flags(sw, sw_flags);
  sw->add_option("--out", sw_out, "Output directory for sweep.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) {
      check_flags([&] { synth.validate(); });
      const auto gt = snl::generate_backbone(synth);
      const auto db = snl::sample_database(gt, synth);
      snl::write_database(db, gen_out);
      snl::write_ground_truth(gt, db.nodes(), gen_out);
      std::size_t instance_edges = 0;
      for (int i = 0; i < db.m(); ++i) instance_edges += db.edges(i).size();
      std::cout << "nodes " << db.n() << "\ninstances " << db.m() << "\nground_truth " << gt.gt_nodes.size()
                << "\nbackbone_edges " << gt.backbone.size() << "\ninstance_edges " << instance_edges << "\n";
    } else if (*fit) {
      const auto solver = solver_config(fit_flags, fit_alpha);
      const auto db = snl::load_database(fit_data);
      const auto model = snl::fit_model(db, {fit_flags.k}, solver);
      snl::write_model(model, db.nodes(), fit_out);
      std::cout << "d " << model.d() << "\nr " << model.basis.r << "\nalpha " << snl::tsv::format_shortest(model.alpha)
                << "\n";
      for (int j = 0; j < model.d(); ++j) {
        std::cout << "eigenvalue_" << j + 1 << " " << snl::tsv::format_17g(model.eigenvalues(j)) << "\n";
      }
    } else if (*tr) {
      const auto db = snl::load_database(tr_data);
      const auto loaded = snl::read_model(tr_model);
      if (loaded.nodes.ids() != db.nodes().ids()) {
        throw snl::Error(snl::ErrorKind::DimensionMismatch, "model nodes differ from dataset nodes");
      }
      const Eigen::MatrixXd emb = snl::transform(loaded.model, snl::assemble_state_matrix(db));
      std::string table = "instance_id\tglobal_state";
      for (Eigen::Index j = 0; j < emb.rows(); ++j) table += "\tz_" + std::to_string(j + 1);
      table += "\n";
      for (int i = 0; i < db.m(); ++i) {
        table += db.instance(i).instance_id + "\t" + std::to_string(db.instance(i).global_state);
        for (Eigen::Index j = 0; j < emb.rows(); ++j) table += "\t" + snl::tsv::format_17g(emb(j, i));
        table += "\n";
      }
      std::error_code ec;
      fs::create_directories(tr_out, ec);
      if (ec) throw snl::Error(snl::ErrorKind::IoError, "cannot create " + tr_out + ": " + ec.message());
      snl::tsv::write_file(fs::path(tr_out) / "embedding.tsv", table);
      std::cout << "instances " << db.m() << "\nd " << emb.rows() << "\n";
    } else if (*sel) {
      if (sel_cfg.min_edge_weight < 0.0) throw UsageError("--min-edge-weight must be >= 0");
      const auto db = snl::load_database(sel_data);
      const auto loaded = snl::read_model(sel_model);
      if (loaded.nodes.ids() != db.nodes().ids()) {
        throw snl::Error(snl::ErrorKind::DimensionMismatch, "model nodes differ from dataset nodes");
      }
      if (sel_cfg.c < 1 || sel_cfg.c > db.n()) {
        throw UsageError("--top-c must lie in 1.." + std::to_string(db.n()));
      }
      const auto report = snl::select_subnetworks(loaded.model.u_matrix, snl::build_generalized_network(db), sel_cfg);
      snl::write_report(report, db.nodes(), sel_out);
      std::cout << "selected " << report.selected.size() << "\ncomponents " << report.components.size() << "\n";
      if (!report.components.empty()) std::cout << "largest_component " << report.components.front().nodes.size() << "\n";
      if (!sel_gt.empty()) {
        const auto gt = snl::read_ground_truth(sel_gt, db.nodes());
        std::cout << "auc " << fixed(snl::ranking_auc(report.scores, gt).auc) << "\n";
      }
    } else if (*ev) {
      EvalFlags flags = ev_flags;
      if (ev_alpha) flags.alpha_grid = {*ev_alpha};
      const auto solver = solver_config(ev_model, flags.alpha_grid.front());
      const auto cfg = eval_config(ev_model, flags);
      const auto db = snl::load_database(ev_data);
      const auto gt = load_ground_truth(flags, db);
      const auto report = snl::run_cv(db, cfg, solver, gt);
      snl::write_eval_report(report, ev_out);
      std::cout << "accuracy " << fixed(report.mean_accuracy) << " +- " << fixed(report.sd_accuracy) << "\n";
      std::cout << "best_alpha " << snl::tsv::format_shortest(report.best_alpha) << "\n";
      if (report.auc) std::cout << "auc " << fixed(*report.auc) << "\n";
    } else if (*sw) {
      const auto solver = solver_config(sw_model, sw_flags.alpha_grid.front());
      const auto cfg = eval_config(sw_model, sw_flags);
      const auto db = snl::load_database(sw_data);
      const auto gt = load_ground_truth(sw_flags, db);
      const std::string table = snl::format_sweep(snl::sweep_alpha(db, cfg, solver, gt));
      if (!sw_out.empty()) {
        std::error_code ec;
        fs::create_directories(sw_out, ec);
        if (ec) throw snl::Error(snl::ErrorKind::IoError, "cannot create " + sw_out + ": " + ec.message());
        snl::tsv::write_file(fs::path(sw_out) / snl::files::kSweep, table);
      }
      std::cout << table;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const snl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
