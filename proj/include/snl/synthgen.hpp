#pragma once

// Synthetic global-state network databases: a scale-free weighted backbone,
// a ground-truth node set whose values carry the class signal, per-instance
// edge sampling, and label / value noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "snl/core_model.hpp"
#include "snl/error.hpp"
#include "snl/rng.hpp"
#include "snl/tsv.hpp"

namespace snl {

struct SynthConfig {
  int n = 300;
  int m = 200;
  int n_gt = 20;
  int edges_per_node = 20;
  double gt_edge_mean = 0.9;
  double gt_edge_sd = 0.1;
  double bg_edge_mean = 0.7;
  double bg_edge_sd = 0.1;
  double global_noise = 0.10;
  double local_noise = 0.30;
  double effect_size = 1.5;  // class-1 mean of ground-truth node values (sd 1)
  double value_scale = 0.2;  // unit of all node values; sets where the alpha grid acts
  std::uint64_t seed = 0;

  void validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigInvalid, msg); };
    auto unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (edges_per_node < 1) fail("edges per node must be >= 1");
    if (n <= edges_per_node) fail("nodes must exceed edges per node");
    if (m < 2) fail("need at least 2 instances");
    if (n_gt < 1 || n_gt > n) fail("ground-truth size must lie in 1..nodes");
    if (!unit(gt_edge_mean) || !unit(bg_edge_mean)) fail("edge probability means must lie in [0,1]");
    if (!(gt_edge_sd > 0.0) || !(bg_edge_sd > 0.0)) fail("edge probability sd must be > 0");
    if (!unit(global_noise) || !unit(local_noise)) fail("noise rates must lie in [0,1]");
    if (!std::isfinite(effect_size)) fail("effect size must be finite");
    if (!(value_scale > 0.0) || !std::isfinite(value_scale)) fail("value scale must be > 0");
  }
};

struct BackboneEdge {
  int p = 0;
  int q = 0;
  double probability = 0.0;
};

struct GroundTruth {
  int n = 0;
  std::vector<int> gt_nodes;  // ascending
  std::vector<BackboneEdge> backbone;  // sorted by (p, q), p < q
};

inline std::string synth_node_id(int p) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "n%05d", p);
  return buf;
}

inline std::string synth_instance_id(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "s%05d", i);
  return buf;
}

/// Normal(mean, sd) restricted to (0, 1] by rejection.
inline double truncated_normal_unit(Rng& rng, double mean, double sd) {
  std::normal_distribution<double> dist(mean, sd);
  while (true) {
    const double x = dist(rng);
    if (x > 0.0 && x <= 1.0) return x;
  }
}

/// Preferential attachment on a ring seed of edges_per_node+1 nodes: each
/// later node links to edges_per_node distinct existing nodes picked with
/// probability proportional to degree.
inline std::vector<Edge> preferential_attachment(int n, int edges_per_node, Rng& rng) {
  const int core = edges_per_node + 1;
  std::set<Edge> edges;
  std::vector<int> endpoints;
  auto add = [&](int a, int b) {
    const Edge e{std::min(a, b), std::max(a, b)};
    if (e.p == e.q || !edges.insert(e).second) return;
    endpoints.push_back(a);
    endpoints.push_back(b);
  };
  for (int i = 0; i < core; ++i) add(i, (i + 1) % core);

  std::vector<int> targets;
  for (int v = core; v < n; ++v) {
    targets.clear();
    std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
    while (static_cast<int>(targets.size()) < edges_per_node) {
      const int t = endpoints[pick(rng)];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    for (int t : targets) add(v, t);
  }
  return {edges.begin(), edges.end()};
}

inline GroundTruth generate_backbone(const SynthConfig& cfg) {
  cfg.validate();
  Rng graph_rng = substream(cfg.seed, "backbone");
  const auto edges = preferential_attachment(cfg.n, cfg.edges_per_node, graph_rng);

  Rng gt_rng = substream(cfg.seed, "ground_truth");
  std::vector<int> all(static_cast<std::size_t>(cfg.n));
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), gt_rng);
  GroundTruth gt;
  gt.n = cfg.n;
  gt.gt_nodes.assign(all.begin(), all.begin() + cfg.n_gt);
  std::sort(gt.gt_nodes.begin(), gt.gt_nodes.end());

  std::vector<bool> is_gt(static_cast<std::size_t>(cfg.n), false);
  for (int p : gt.gt_nodes) is_gt[static_cast<std::size_t>(p)] = true;
  Rng prob_rng = substream(cfg.seed, "edge_probability");
  gt.backbone.reserve(edges.size());
  for (const auto& e : edges) {
    const bool both = is_gt[static_cast<std::size_t>(e.p)] && is_gt[static_cast<std::size_t>(e.q)];
    const double prob = both ? truncated_normal_unit(prob_rng, cfg.gt_edge_mean, cfg.gt_edge_sd)
                             : truncated_normal_unit(prob_rng, cfg.bg_edge_mean, cfg.bg_edge_sd);
    gt.backbone.push_back({e.p, e.q, prob});
  }
  return gt;
}

/// Samples m instances from the backbone. Clean labels are balanced
/// (floor(m/2) zeros); ground-truth node values are Normal(effect * label, 1),
/// all others Normal(0, 1). Local noise replaces each ground-truth value
/// with a Normal(0, 1) draw; global noise flips labels afterwards. All
/// values are finally multiplied by value_scale. Cosines and the whitened
/// objective ignore that factor, while the constraint term scales with
/// 1 / value_scale^2.
inline NetworkDatabase sample_database(const GroundTruth& gt, const SynthConfig& cfg) {
  cfg.validate();
  if (gt.n != cfg.n) throw Error(ErrorKind::ConfigInvalid, "ground truth built for a different node count");

  Rng label_rng = substream(cfg.seed, "labels");
  std::vector<int> labels(static_cast<std::size_t>(cfg.m), 1);
  std::fill(labels.begin(), labels.begin() + cfg.m / 2, 0);
  std::shuffle(labels.begin(), labels.end(), label_rng);

  std::vector<bool> is_gt(static_cast<std::size_t>(cfg.n), false);
  for (int p : gt.gt_nodes) is_gt[static_cast<std::size_t>(p)] = true;

  Rng edge_rng = substream(cfg.seed, "edges");
  Rng value_rng = substream(cfg.seed, "values");
  Rng noise_rng = substream(cfg.seed, "noise");
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<NetworkInstance> instances;
  std::vector<std::vector<Edge>> edges;
  instances.reserve(static_cast<std::size_t>(cfg.m));
  edges.reserve(static_cast<std::size_t>(cfg.m));
  for (int i = 0; i < cfg.m; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    NetworkInstance inst;
    inst.instance_id = synth_instance_id(i);
    inst.valid.assign(static_cast<std::size_t>(cfg.n), true);
    inst.values.resize(cfg.n);
    for (int p = 0; p < cfg.n; ++p) {
      const double mean = (is_gt[static_cast<std::size_t>(p)] && label == 1) ? cfg.effect_size : 0.0;
      inst.values(p) = mean + std_normal(value_rng);
    }
    for (int p : gt.gt_nodes) {
      if (unit(noise_rng) < cfg.local_noise) inst.values(p) = std_normal(noise_rng);
    }
    inst.values *= cfg.value_scale;
    inst.global_state = unit(noise_rng) < cfg.global_noise ? 1 - label : label;

    std::vector<Edge> list;
    for (const auto& e : gt.backbone) {
      if (unit(edge_rng) < e.probability) list.push_back({e.p, e.q});
    }
    instances.push_back(std::move(inst));
    edges.push_back(std::move(list));
  }

  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(cfg.n));
  for (int p = 0; p < cfg.n; ++p) ids.push_back(synth_node_id(p));
  return NetworkDatabase(NodeIndex(std::move(ids)), std::move(instances), std::move(edges));
}

namespace files {
inline constexpr const char* kGroundTruth = "ground_truth.tsv";
inline constexpr const char* kBackbone = "backbone.tsv";
}  // namespace files

inline void write_ground_truth(const GroundTruth& gt, const NodeIndex& nodes, const std::filesystem::path& dir) {
  std::string gt_file = "node_id\n";
  for (int p : gt.gt_nodes) gt_file += nodes.id(p) + "\n";
  std::string backbone = "node_u\tnode_v\tprobability\n";
  for (const auto& e : gt.backbone) {
    backbone += nodes.id(e.p) + "\t" + nodes.id(e.q) + "\t" + tsv::format_shortest(e.probability) + "\n";
  }
  tsv::write_file(dir / files::kGroundTruth, gt_file);
  tsv::write_file(dir / files::kBackbone, backbone);
}

/// Reads a `node_id` list and maps it onto `nodes`.
inline std::vector<int> read_ground_truth(const std::filesystem::path& path, const NodeIndex& nodes) {
  const auto table = tsv::read(path, {"node_id"});
  std::vector<int> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int p = nodes.find(table.rows[r][0]);
    if (p < 0) {
      throw Error(ErrorKind::UnknownNode, "'" + table.rows[r][0] + "' at " + tsv::location(table.path, table.lines[r]));
    }
    out.push_back(p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace snl
