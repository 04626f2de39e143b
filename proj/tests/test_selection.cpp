#include <queue>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "snl/selection.hpp"
#include "test_util.hpp"

namespace snl {
namespace {

// Breadth-first component oracle over the induced subgraph.
std::vector<std::set<int>> bfs_components(const std::vector<int>& selected, const GeneralizedNetwork& g) {
  std::set<int> chosen(selected.begin(), selected.end());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(g.n));
  for (const auto& e : g.edges) {
    if (chosen.count(e.p) && chosen.count(e.q)) {
      adj[static_cast<std::size_t>(e.p)].push_back(e.q);
      adj[static_cast<std::size_t>(e.q)].push_back(e.p);
    }
  }
  std::set<int> seen;
  std::vector<std::set<int>> out;
  for (int s : chosen) {
    if (seen.count(s)) continue;
    std::set<int> comp;
    std::queue<int> todo;
    todo.push(s);
    seen.insert(s);
    while (!todo.empty()) {
      const int p = todo.front();
      todo.pop();
      comp.insert(p);
      for (int q : adj[static_cast<std::size_t>(p)]) {
        if (seen.insert(q).second) todo.push(q);
      }
    }
    out.push_back(comp);
  }
  return out;
}

TEST(ScoreNodes, Examples) {
  Eigen::MatrixXd u(3, 2);
  u << 0.9, 0.2,
       -0.1, 0.8,
       0.3, -0.4;
  const Eigen::VectorXd s = score_nodes(u);
  EXPECT_DOUBLE_EQ(s(0), 0.9);
  EXPECT_DOUBLE_EQ(s(1), 0.8);
  EXPECT_DOUBLE_EQ(s(2), 0.4);
  EXPECT_EQ(score_nodes(u.leftCols(1)), u.col(0).cwiseAbs());
  EXPECT_EQ(score_nodes(Eigen::MatrixXd::Zero(4, 3)), Eigen::VectorXd::Zero(4));
}

TEST(ScoreNodes, InvariantToColumnSignFlips) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Eigen::MatrixXd u(20, 3);
  for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = g(rng);
  const Eigen::VectorXd base = score_nodes(u);
  for (int mask = 1; mask < 8; ++mask) {
    Eigen::MatrixXd flipped = u;
    for (int j = 0; j < 3; ++j) {
      if (mask & (1 << j)) flipped.col(j) *= -1.0;
    }
    EXPECT_EQ(score_nodes(flipped), base);
  }
}

TEST(SelectTopNodes, Examples) {
  EXPECT_EQ(select_top_nodes(Eigen::Vector3d(0.9, 0.8, 0.4), 2), (std::vector<int>{0, 1}));
  EXPECT_EQ(select_top_nodes(Eigen::Vector2d(0.5, 0.5), 1), (std::vector<int>{0}));
  Eigen::VectorXd s(5);
  s << 0.2, 0.7, 0.2, 0.9, 0.7;
  EXPECT_EQ(select_top_nodes(s, 5), (std::vector<int>{3, 1, 4, 0, 2}));
  EXPECT_EQ(select_top_nodes(s, 2), (std::vector<int>{3, 1}));
  for (int c : {0, 6}) {
    try {
      select_top_nodes(s, c);
      FAIL() << c;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::CTooLarge);
    }
  }
}

TEST(ExtractSubnetworks, Examples) {
  GeneralizedNetwork g{4, 1, {{0, 1, 1, 1.0}}};
  auto comps = extract_subnetworks({0, 1, 3}, g);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].nodes, (std::vector<int>{0, 1}));
  EXPECT_EQ(comps[0].edges.size(), 1u);
  EXPECT_EQ(comps[1].nodes, (std::vector<int>{3}));
  EXPECT_TRUE(comps[1].edges.empty());

  comps = extract_subnetworks({3, 2}, g);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].nodes, (std::vector<int>{2}));
  EXPECT_EQ(comps[1].nodes, (std::vector<int>{3}));
}

TEST(ExtractSubnetworks, SevenAndFourChains) {
  // Chains 0-1-...-6 and 7-8-9-10; node 11 links the chains but is not
  // selected, and a weak edge hangs off node 12.
  GeneralizedNetwork g{13, 4, {}};
  for (int p = 0; p < 6; ++p) g.edges.push_back({p, p + 1, 4, 1.0});
  for (int p = 7; p < 10; ++p) g.edges.push_back({p, p + 1, 2, 0.5});
  g.edges.push_back({6, 11, 1, 0.25});
  g.edges.push_back({7, 11, 1, 0.25});
  g.edges.push_back({2, 12, 1, 0.25});
  std::vector<int> selected{10, 3, 0, 7, 5, 1, 8, 6, 2, 9, 4};

  const auto comps = extract_subnetworks(selected, g);
  const auto oracle = bfs_components(selected, g);
  ASSERT_EQ(comps.size(), oracle.size());
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].nodes.size(), 7u);
  EXPECT_EQ(comps[1].nodes.size(), 4u);
  EXPECT_EQ(comps[0].edges.size(), 6u);
  EXPECT_EQ(comps[1].edges.size(), 3u);
  for (const auto& comp : comps) {
    const std::set<int> nodes(comp.nodes.begin(), comp.nodes.end());
    EXPECT_NE(std::find(oracle.begin(), oracle.end(), nodes), oracle.end());
    for (const auto& e : comp.edges) {
      EXPECT_TRUE(nodes.count(e.p) && nodes.count(e.q));
    }
  }
}

TEST(ExtractSubnetworks, MinEdgeWeightFilter) {
  GeneralizedNetwork g{4, 4, {{0, 1, 4, 1.0}, {1, 2, 1, 0.25}, {2, 3, 2, 0.5}}};
  EXPECT_EQ(extract_subnetworks({0, 1, 2, 3}, g).size(), 1u);
  const auto comps = extract_subnetworks({0, 1, 2, 3}, g, 0.5);
  ASSERT_EQ(comps.size(), 2u);
  EXPECT_EQ(comps[0].nodes, (std::vector<int>{0, 1}));
  EXPECT_EQ(comps[1].nodes, (std::vector<int>{2, 3}));
}

TEST(SelectSubnetworks, PartitionMatchesOracleOnRandomGraphs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 25;
    GeneralizedNetwork net{n, 10, {}};
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (unit(rng) < 0.08) net.edges.push_back({p, q, 1, 0.1});
      }
    }
    Eigen::MatrixXd u(n, 2);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = g(rng);
    const int c = 1 + trial % n;
    const auto report = select_subnetworks(u, net, {c, 0.0});
    ASSERT_EQ(static_cast<int>(report.selected.size()), c);
    const auto oracle = bfs_components(report.selected, net);
    ASSERT_EQ(report.components.size(), oracle.size());
    std::set<int> covered;
    std::size_t previous = static_cast<std::size_t>(n) + 1;
    for (const auto& comp : report.components) {
      EXPECT_LE(comp.nodes.size(), previous);
      previous = comp.nodes.size();
      for (int p : comp.nodes) EXPECT_TRUE(covered.insert(p).second);
    }
    EXPECT_EQ(covered, std::set<int>(report.selected.begin(), report.selected.end()));
    for (std::size_t i = 0; i < report.selected.size(); ++i) {
      const auto& comp = report.components[static_cast<std::size_t>(report.component_of[i])];
      EXPECT_TRUE(std::binary_search(comp.nodes.begin(), comp.nodes.end(), report.selected[i]));
    }
  }
}

TEST(ReportFiles, Layout) {
  Eigen::MatrixXd u(4, 1);
  u << 0.1, -0.9, 0.5, 0.3;
  GeneralizedNetwork g{4, 2, {{1, 2, 2, 1.0}, {0, 3, 1, 0.5}}};
  const auto report = select_subnetworks(u, g, {2, 0.0});
  const NodeIndex nodes(std::vector<std::string>{"a", "b", "c", "d"});
  testing::TempDir dir("report");
  write_report(report, nodes, dir.path());
  EXPECT_EQ(testing::read_text(dir / "report.tsv"),
            "rank\tnode_id\tscore\tcomponent_id\n"
            "1\tb\t0.90000000000000002\t1\n"
            "2\tc\t0.5\t1\n"
            "3\td\t0.29999999999999999\t\n"
            "4\ta\t0.10000000000000001\t\n");
  EXPECT_EQ(testing::read_text(dir / "components.tsv"), "component_id\tsize\tedge_count\n1\t2\t1\n");
}

}  // namespace
}  // namespace snl
