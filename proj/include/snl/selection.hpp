#pragma once

// Node scoring from learned eigenvectors, top-c selection, and connected
// subnetworks over the generalized network.

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "snl/core_model.hpp"
#include "snl/error.hpp"
#include "snl/tsv.hpp"

namespace snl {

struct SelectionConfig {
  int c = 50;
  double min_edge_weight = 0.0;  // generalized edges below this are ignored
};

struct Subnetwork {
  std::vector<int> nodes;           // ascending ordinals
  std::vector<WeightedEdge> edges;  // induced generalized edges
};

struct SubnetworkReport {
  Eigen::VectorXd scores;
  std::vector<int> selected;  // descending score, ties by ordinal
  std::vector<Subnetwork> components;
  std::vector<int> component_of;  // per selected position
};

/// score[p] = max over columns of |U(p, i)|.
inline Eigen::VectorXd score_nodes(const Eigen::MatrixXd& u_matrix) {
  if (u_matrix.cols() < 1) throw Error(ErrorKind::ConfigInvalid, "need at least one eigenvector");
  return u_matrix.cwiseAbs().rowwise().maxCoeff();
}

/// Node ordering by descending score with ties to the lower ordinal.
inline std::vector<int> rank_nodes(const Eigen::VectorXd& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

inline std::vector<int> select_top_nodes(const Eigen::VectorXd& scores, int c) {
  if (c < 1 || c > scores.size()) {
    throw Error(ErrorKind::CTooLarge, "c=" + std::to_string(c) + " needs 1 <= c <= n = " + std::to_string(scores.size()));
  }
  auto order = rank_nodes(scores);
  order.resize(static_cast<std::size_t>(c));
  return order;
}

namespace detail {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace detail

/// Connected components of the subgraph of `g` induced by `selected`,
/// ordered by size (descending) then smallest member ordinal.
inline std::vector<Subnetwork> extract_subnetworks(const std::vector<int>& selected, const GeneralizedNetwork& g,
                                                   double min_edge_weight = 0.0) {
  std::vector<int> slot(static_cast<std::size_t>(g.n), -1);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const int p = selected[i];
    if (p < 0 || p >= g.n) throw Error(ErrorKind::UnknownNode, "selected ordinal out of range");
    slot[static_cast<std::size_t>(p)] = static_cast<int>(i);
  }
  detail::DisjointSets sets(selected.size());
  std::vector<WeightedEdge> induced;
  for (const auto& e : g.edges) {
    const int a = slot[static_cast<std::size_t>(e.p)];
    const int b = slot[static_cast<std::size_t>(e.q)];
    if (a < 0 || b < 0 || e.weight < min_edge_weight) continue;
    sets.unite(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    induced.push_back(e);
  }

  std::vector<Subnetwork> comps;
  std::vector<int> comp_of_root(selected.size(), -1);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto root = sets.find(i);
    if (comp_of_root[root] < 0) {
      comp_of_root[root] = static_cast<int>(comps.size());
      comps.emplace_back();
    }
    comps[static_cast<std::size_t>(comp_of_root[root])].nodes.push_back(selected[i]);
  }
  for (const auto& e : induced) {
    const auto root = sets.find(static_cast<std::size_t>(slot[static_cast<std::size_t>(e.p)]));
    comps[static_cast<std::size_t>(comp_of_root[root])].edges.push_back(e);
  }
  for (auto& comp : comps) std::sort(comp.nodes.begin(), comp.nodes.end());
  std::sort(comps.begin(), comps.end(), [](const Subnetwork& a, const Subnetwork& b) {
    if (a.nodes.size() != b.nodes.size()) return a.nodes.size() > b.nodes.size();
    return a.nodes.front() < b.nodes.front();
  });
  return comps;
}

inline SubnetworkReport select_subnetworks(const Eigen::MatrixXd& u_matrix, const GeneralizedNetwork& g,
                                           const SelectionConfig& cfg) {
  if (u_matrix.rows() != g.n) throw Error(ErrorKind::DimensionMismatch, "model rows != generalized network nodes");
  SubnetworkReport report;
  report.scores = score_nodes(u_matrix);
  report.selected = select_top_nodes(report.scores, cfg.c);
  report.components = extract_subnetworks(report.selected, g, cfg.min_edge_weight);
  std::vector<int> comp_of_node(static_cast<std::size_t>(g.n), -1);
  for (std::size_t c = 0; c < report.components.size(); ++c) {
    for (int p : report.components[c].nodes) comp_of_node[static_cast<std::size_t>(p)] = static_cast<int>(c);
  }
  for (int p : report.selected) report.component_of.push_back(comp_of_node[static_cast<std::size_t>(p)]);
  return report;
}

namespace files {
inline constexpr const char* kReport = "report.tsv";
inline constexpr const char* kComponents = "components.tsv";
}  // namespace files

/// report.tsv (`rank`, `node_id`, `score`, `component_id`) covers every
/// node; unselected nodes carry an empty component id. components.tsv
/// lists `component_id`, `size`, `edge_count`.
inline void write_report(const SubnetworkReport& report, const NodeIndex& nodes, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::vector<int> comp_of_node(static_cast<std::size_t>(nodes.size()), -1);
  for (std::size_t i = 0; i < report.selected.size(); ++i) {
    comp_of_node[static_cast<std::size_t>(report.selected[i])] = report.component_of[i];
  }
  std::string table = "rank\tnode_id\tscore\tcomponent_id\n";
  const auto order = rank_nodes(report.scores);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const int p = order[rank];
    const int comp = comp_of_node[static_cast<std::size_t>(p)];
    table += std::to_string(rank + 1) + "\t" + nodes.id(p) + "\t" + tsv::format_17g(report.scores(p)) + "\t" +
             (comp >= 0 ? std::to_string(comp + 1) : std::string()) + "\n";
  }
  tsv::write_file(dir / files::kReport, table);

  std::string comps = "component_id\tsize\tedge_count\n";
  for (std::size_t c = 0; c < report.components.size(); ++c) {
    comps += std::to_string(c + 1) + "\t" + std::to_string(report.components[c].nodes.size()) + "\t" +
             std::to_string(report.components[c].edges.size()) + "\n";
  }
  tsv::write_file(dir / files::kComponents, comps);
}

}  // namespace snl
