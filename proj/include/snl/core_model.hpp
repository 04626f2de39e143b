#pragma once

// Network-database data model: node index, network instances with local
// values and a global state, the generalized (union) network and the
// stacked state matrix, plus the on-disk dataset directory format.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "snl/error.hpp"
#include "snl/tsv.hpp"

namespace snl {

/// Maps between node string ids and ordinals 0..n-1 (file order).
class NodeIndex {
 public:
  NodeIndex() = default;

  explicit NodeIndex(std::vector<std::string> ids) : ids_(std::move(ids)) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!ordinals_.emplace(ids_[i], static_cast<int>(i)).second) {
        throw Error(ErrorKind::ParseError, "duplicate node id '" + ids_[i] + "'");
      }
    }
  }

  int size() const { return static_cast<int>(ids_.size()); }
  const std::string& id(int ordinal) const { return ids_.at(static_cast<std::size_t>(ordinal)); }
  const std::vector<std::string>& ids() const { return ids_; }

  /// Ordinal of `id`, or -1 when unknown.
  int find(const std::string& id) const {
    const auto it = ordinals_.find(id);
    return it == ordinals_.end() ? -1 : it->second;
  }

  int ordinal(const std::string& id) const {
    const int o = find(id);
    if (o < 0) throw Error(ErrorKind::UnknownNode, "'" + id + "'");
    return o;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> ordinals_;
};

/// Undirected edge in canonical order p < q.
struct Edge {
  int p = 0;
  int q = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct NetworkInstance {
  std::string instance_id;
  std::vector<bool> valid;  // false = null/missing node
  Eigen::VectorXd values;   // entries ignored where !valid
  int global_state = 0;     // raw label as read
};

/// A validated database of network instances over one shared node index.
///
/// Raw global states are remapped to dense labels 0..num_classes()-1 in
/// ascending order of the raw value.
class NetworkDatabase {
 public:
  NetworkDatabase() = default;

  NetworkDatabase(NodeIndex nodes, std::vector<NetworkInstance> instances,
                  std::vector<std::vector<Edge>> instance_edges)
      : nodes_(std::move(nodes)), instances_(std::move(instances)), edges_(std::move(instance_edges)) {
    validate_and_index();
  }

  int n() const { return nodes_.size(); }
  int m() const { return static_cast<int>(instances_.size()); }
  int num_classes() const { return static_cast<int>(states_.size()); }

  const NodeIndex& nodes() const { return nodes_; }
  const std::vector<NetworkInstance>& instances() const { return instances_; }
  const NetworkInstance& instance(int i) const { return instances_.at(static_cast<std::size_t>(i)); }
  const std::vector<Edge>& edges(int i) const { return edges_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::vector<Edge>>& all_edges() const { return edges_; }

  /// Sorted distinct raw global states; position = dense label.
  const std::vector<int>& states() const { return states_; }
  /// Dense label of each instance.
  const std::vector<int>& labels() const { return labels_; }

 private:
  void validate_and_index() {
    const int nn = nodes_.size();
    if (edges_.size() != instances_.size()) {
      throw Error(ErrorKind::DimensionMismatch, "one edge list per instance required");
    }
    std::set<std::string> seen_ids;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      auto& inst = instances_[i];
      if (!seen_ids.insert(inst.instance_id).second) {
        throw Error(ErrorKind::ParseError, "duplicate instance id '" + inst.instance_id + "'");
      }
      if (static_cast<int>(inst.valid.size()) != nn || inst.values.size() != nn) {
        throw Error(ErrorKind::DimensionMismatch, "instance '" + inst.instance_id + "' length != n");
      }
      for (int p = 0; p < nn; ++p) {
        if (inst.valid[static_cast<std::size_t>(p)] && !std::isfinite(inst.values(p))) {
          throw Error(ErrorKind::ParseError, "non-finite value in instance '" + inst.instance_id + "'");
        }
      }
      auto& list = edges_[i];
      for (auto& e : list) {
        if (e.p > e.q) std::swap(e.p, e.q);
        if (e.p < 0 || e.q >= nn) throw Error(ErrorKind::UnknownNode, "edge ordinal out of range");
        if (e.p == e.q) {
          throw Error(ErrorKind::ParseError, "self-loop on node '" + nodes_.id(e.p) + "' in instance '" +
                                                 inst.instance_id + "'");
        }
        if (!inst.valid[static_cast<std::size_t>(e.p)] || !inst.valid[static_cast<std::size_t>(e.q)]) {
          throw Error(ErrorKind::EdgeOnNullNode,
                      inst.instance_id + "," + nodes_.id(e.p) + "," + nodes_.id(e.q));
        }
      }
      std::sort(list.begin(), list.end());
      const auto dup = std::adjacent_find(list.begin(), list.end());
      if (dup != list.end()) {
        throw Error(ErrorKind::DuplicateEdge,
                    inst.instance_id + "," + nodes_.id(dup->p) + "," + nodes_.id(dup->q));
      }
    }
    std::set<int> distinct;
    for (const auto& inst : instances_) distinct.insert(inst.global_state);
    if (instances_.size() < 2 || distinct.size() < 2) {
      throw Error(ErrorKind::SingleClassDatabase, "at least two instances with two distinct global states required");
    }
    states_.assign(distinct.begin(), distinct.end());
    labels_.clear();
    for (const auto& inst : instances_) {
      labels_.push_back(static_cast<int>(std::lower_bound(states_.begin(), states_.end(), inst.global_state) -
                                         states_.begin()));
    }
  }

  NodeIndex nodes_;
  std::vector<NetworkInstance> instances_;
  std::vector<std::vector<Edge>> edges_;
  std::vector<int> states_;
  std::vector<int> labels_;
};

/// Database restricted to the given instance positions (in that order).
/// Throws SingleClassDatabase if the subset no longer has two states.
inline NetworkDatabase subset_instances(const NetworkDatabase& db, const std::vector<int>& rows) {
  std::vector<NetworkInstance> instances;
  std::vector<std::vector<Edge>> edges;
  instances.reserve(rows.size());
  edges.reserve(rows.size());
  for (int i : rows) {
    instances.push_back(db.instance(i));
    edges.push_back(db.edges(i));
  }
  return NetworkDatabase(db.nodes(), std::move(instances), std::move(edges));
}

/// Returns a copy of `db` with instance global states replaced.
inline NetworkDatabase with_global_states(const NetworkDatabase& db, const std::vector<int>& raw_states) {
  if (static_cast<int>(raw_states.size()) != db.m()) {
    throw Error(ErrorKind::LengthMismatch, "one global state per instance required");
  }
  auto instances = db.instances();
  for (std::size_t i = 0; i < instances.size(); ++i) instances[i].global_state = raw_states[i];
  return NetworkDatabase(db.nodes(), std::move(instances), db.all_edges());
}

// ---------------------------------------------------------------------------
// Generalized network

struct WeightedEdge {
  int p = 0;
  int q = 0;
  int count = 0;       // number of instances containing the edge
  double weight = 0.0; // count / m
};

/// Union of all instance edges; weight = fraction of instances with the edge.
struct GeneralizedNetwork {
  int n = 0;
  int m = 0;
  std::vector<WeightedEdge> edges;  // sorted by (p, q), p < q
};

inline GeneralizedNetwork build_generalized_network(const NetworkDatabase& db) {
  std::map<std::pair<int, int>, int> counts;
  for (const auto& list : db.all_edges()) {
    for (const auto& e : list) ++counts[{e.p, e.q}];
  }
  GeneralizedNetwork g;
  g.n = db.n();
  g.m = db.m();
  g.edges.reserve(counts.size());
  const double m = static_cast<double>(db.m());
  for (const auto& [key, count] : counts) {
    g.edges.push_back({key.first, key.second, count, static_cast<double>(count) / m});
  }
  return g;
}

// ---------------------------------------------------------------------------
// State matrix

/// n x m matrix; column i holds instance i's values, 0 where the node is null.
struct StateMatrix {
  Eigen::MatrixXd values;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

inline StateMatrix assemble_state_matrix(const NetworkDatabase& db) {
  StateMatrix v{Eigen::MatrixXd::Zero(db.n(), db.m())};
  for (int i = 0; i < db.m(); ++i) {
    const auto& inst = db.instance(i);
    for (int p = 0; p < db.n(); ++p) {
      if (inst.valid[static_cast<std::size_t>(p)]) v.values(p, i) = inst.values(p);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Dataset directory I/O

namespace files {
inline constexpr const char* kNodes = "nodes.tsv";
inline constexpr const char* kInstances = "instances.tsv";
inline constexpr const char* kValues = "values.tsv";
inline constexpr const char* kEdges = "edges.tsv";
}  // namespace files

inline NetworkDatabase load_database(const std::filesystem::path& dir) {
  for (const char* name : {files::kNodes, files::kInstances, files::kValues, files::kEdges}) {
    if (!std::filesystem::is_regular_file(dir / name)) {
      throw Error(ErrorKind::MissingFile, (dir / name).string());
    }
  }

  const auto node_table = tsv::read(dir / files::kNodes, {"node_id"});
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < node_table.rows.size(); ++r) {
    if (node_table.rows[r][0].empty()) {
      throw Error(ErrorKind::ParseError, tsv::location(node_table.path, node_table.lines[r]) + ": empty node id");
    }
    ids.push_back(node_table.rows[r][0]);
  }
  NodeIndex nodes(std::move(ids));
  const int n = nodes.size();

  const auto inst_table = tsv::read(dir / files::kInstances, {"instance_id", "global_state"});
  std::vector<NetworkInstance> instances;
  std::unordered_map<std::string, int> inst_pos;
  for (std::size_t r = 0; r < inst_table.rows.size(); ++r) {
    const auto& row = inst_table.rows[r];
    NetworkInstance inst;
    inst.instance_id = row[0];
    inst.global_state = static_cast<int>(tsv::parse_int(row[1], inst_table.path, inst_table.lines[r]));
    inst.valid.assign(static_cast<std::size_t>(n), false);
    inst.values = Eigen::VectorXd::Zero(n);
    if (!inst_pos.emplace(inst.instance_id, static_cast<int>(instances.size())).second) {
      throw Error(ErrorKind::ParseError,
                  tsv::location(inst_table.path, inst_table.lines[r]) + ": duplicate instance '" + row[0] + "'");
    }
    instances.push_back(std::move(inst));
  }

  auto lookup_instance = [&](const tsv::Table& t, std::size_t r) {
    const auto it = inst_pos.find(t.rows[r][0]);
    if (it == inst_pos.end()) {
      throw Error(ErrorKind::ParseError,
                  tsv::location(t.path, t.lines[r]) + ": unknown instance '" + t.rows[r][0] + "'");
    }
    return it->second;
  };
  auto lookup_node = [&](const tsv::Table& t, std::size_t r, const std::string& id) {
    const int o = nodes.find(id);
    if (o < 0) throw Error(ErrorKind::UnknownNode, "'" + id + "' at " + tsv::location(t.path, t.lines[r]));
    return o;
  };

  const auto value_table = tsv::read(dir / files::kValues, {"instance_id", "node_id", "value"});
  for (std::size_t r = 0; r < value_table.rows.size(); ++r) {
    const auto& row = value_table.rows[r];
    auto& inst = instances[static_cast<std::size_t>(lookup_instance(value_table, r))];
    const int p = lookup_node(value_table, r, row[1]);
    if (inst.valid[static_cast<std::size_t>(p)]) {
      throw Error(ErrorKind::ParseError, tsv::location(value_table.path, value_table.lines[r]) +
                                             ": duplicate value row");
    }
    inst.valid[static_cast<std::size_t>(p)] = true;
    inst.values(p) = tsv::parse_double(row[2], value_table.path, value_table.lines[r]);
  }

  const auto edge_table = tsv::read(dir / files::kEdges, {"instance_id", "node_u", "node_v"});
  std::vector<std::vector<Edge>> edges(instances.size());
  for (std::size_t r = 0; r < edge_table.rows.size(); ++r) {
    const auto& row = edge_table.rows[r];
    const int i = lookup_instance(edge_table, r);
    const int p = lookup_node(edge_table, r, row[1]);
    const int q = lookup_node(edge_table, r, row[2]);
    edges[static_cast<std::size_t>(i)].push_back({std::min(p, q), std::max(p, q)});
  }

  return NetworkDatabase(std::move(nodes), std::move(instances), std::move(edges));
}

/// Writes the four dataset files. Values use the shortest round-trip
/// decimal so reloading reproduces the state matrix bit-for-bit.
inline void write_database(const NetworkDatabase& db, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());

  std::string nodes = "node_id\n";
  for (const auto& id : db.nodes().ids()) nodes += id + "\n";

  std::string instances = "instance_id\tglobal_state\n";
  std::string values = "instance_id\tnode_id\tvalue\n";
  std::string edges = "instance_id\tnode_u\tnode_v\n";
  for (int i = 0; i < db.m(); ++i) {
    const auto& inst = db.instance(i);
    instances += inst.instance_id + "\t" + std::to_string(inst.global_state) + "\n";
    for (int p = 0; p < db.n(); ++p) {
      if (!inst.valid[static_cast<std::size_t>(p)]) continue;
      values += inst.instance_id + "\t" + db.nodes().id(p) + "\t" + tsv::format_shortest(inst.values(p)) + "\n";
    }
    for (const auto& e : db.edges(i)) {
      edges += inst.instance_id + "\t" + db.nodes().id(e.p) + "\t" + db.nodes().id(e.q) + "\n";
    }
  }
  tsv::write_file(dir / files::kNodes, nodes);
  tsv::write_file(dir / files::kInstances, instances);
  tsv::write_file(dir / files::kValues, values);
  tsv::write_file(dir / files::kEdges, edges);
}

}  // namespace snl
