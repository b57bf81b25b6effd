#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "mgvae/error.hpp"
#include "mgvae/graph.hpp"
#include "mgvae/ops.hpp"
#include "oracles.hpp"

using namespace mgvae;

namespace {

Graph path_graph(std::size_t n) {
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return make_graph(n, edges);
}

Graph edge_list(const std::string& text) {
  std::istringstream in(text);
  return parse_edge_list(in);
}

// Carbon and oxygen skeleton of aspirin with the three-cluster partition:
// the ring {0, 1, 2, 6, 11, 12}, the carboxyl group {3, 4, 5} and the acetyl
// ester group {7, 8, 9, 10}.
Graph aspirin() {
  return make_graph(13, {{0, 1}, {1, 2}, {2, 6}, {6, 11}, {11, 12}, {12, 0},
                         {3, 4}, {3, 5},
                         {8, 7}, {8, 9}, {8, 10},
                         {2, 3}, {1, 7}});
}

ClusterAssignment aspirin_partition() {
  std::vector<std::size_t> labels(13, 1);
  for (std::size_t v : {3, 4, 5}) labels[v] = 0;
  for (std::size_t v : {7, 8, 9, 10}) labels[v] = 2;
  return ClusterAssignment(labels, 3);
}

ClusterAssignment random_partition(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.index(k);
  return ClusterAssignment(labels, k);
}

}  // namespace

TEST(LoadGraph, PathFromEdgeList) {
  const Graph g = edge_list("0 1\n1 2\n");
  EXPECT_EQ(g.num_nodes(), 3u);
  EXPECT_EQ(g.weight(0, 1), 1.0);
  EXPECT_EQ(g.weight(1, 2), 1.0);
  EXPECT_EQ(g.weight(2, 1), 1.0);
  EXPECT_EQ(g.weight(0, 2), 0.0);
  EXPECT_EQ(g.feature_dim(), kDegreeBuckets);
}

TEST(LoadGraph, DeclaredEmptyGraph) {
  const Graph g = edge_list("# nodes 4\n");
  EXPECT_EQ(g.num_nodes(), 4u);
  EXPECT_EQ(g.num_edges(), 0u);
}

TEST(LoadGraph, Errors) {
  EXPECT_THROW(edge_list("0 -1\n"), FormatError);
  EXPECT_THROW(edge_list("0 1 -2\n"), FormatError);
  EXPECT_THROW(edge_list("# nodes 2\n0 5\n"), FormatError);
  EXPECT_THROW(edge_list("0 x\n"), FormatError);
  EXPECT_THROW(parse_graph_json("{\"n\": 2, \"edges\": [[0]]}"), FormatError);
  EXPECT_THROW(parse_graph_json("not json"), FormatError);
  EXPECT_THROW(load_graph("/nonexistent/graph.txt", GraphFormat::kEdgeList), IoError);
}

TEST(LoadGraph, WeightsAndDegreeFeatures) {
  const Graph g = edge_list("0 1 2.5\n0 2\n0 3\n");
  EXPECT_EQ(g.weight(1, 0), 2.5);
  // Node 0 has degree 3, the leaves degree 1.
  EXPECT_EQ(g.node_features.at({0, 3}), 1.0);
  EXPECT_EQ(g.node_features.at({1, 1}), 1.0);
}

TEST(GraphJson, RoundTrip) {
  Rng rng(4);
  const Graph g = oracle::random_graph(9, 0.4, rng);
  const Graph back = parse_graph_json(graph_to_json(g));
  EXPECT_EQ(back.num_nodes(), g.num_nodes());
  EXPECT_EQ(max_abs_diff(back.adjacency, g.adjacency), 0.0);
  EXPECT_EQ(max_abs_diff(back.node_features, g.node_features), 0.0);

  const auto path = std::filesystem::temp_directory_path() / "mgvae_graph_rt.json";
  save_graph_json(path, g);
  const Graph loaded = load_graph(path);
  EXPECT_EQ(max_abs_diff(loaded.adjacency, g.adjacency), 0.0);
}

TEST(InducedSubgraph, SingleEdgeOfPath) {
  const Graph s = induced_subgraph(path_graph(4), {0, 1});
  EXPECT_EQ(s.num_nodes(), 2u);
  EXPECT_EQ(s.num_edges(), 1u);
  EXPECT_EQ(s.weight(0, 1), 1.0);
}

TEST(InducedSubgraph, FullNodeSetIsIdentity) {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Graph g = oracle::random_graph(2 + rng.index(8), 0.5, rng);
    std::vector<std::size_t> all(g.num_nodes());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const Graph s = induced_subgraph(g, all);
    EXPECT_EQ(max_abs_diff(s.adjacency, g.adjacency), 0.0);
    EXPECT_EQ(max_abs_diff(s.node_features, g.node_features), 0.0);
  }
}

TEST(InducedSubgraph, KeepsRequestedOrder) {
  const Graph s = induced_subgraph(path_graph(4), {3, 2, 0});
  EXPECT_EQ(s.weight(0, 1), 1.0);
  EXPECT_EQ(s.weight(1, 2), 0.0);
}

TEST(InducedSubgraph, Errors) {
  EXPECT_THROW(induced_subgraph(path_graph(4), {0, 0}), DomainError);
  EXPECT_THROW(induced_subgraph(path_graph(4), {7}), DomainError);
}

TEST(Coarsen, Aspirin) {
  const Tensor c = coarsen_adjacency(aspirin().adjacency, aspirin_partition());
  const Tensor expected = Tensor::matrix({{2, 1, 0}, {1, 6, 1}, {0, 1, 3}});
  EXPECT_EQ(max_abs_diff(c, expected), 0.0);
}

TEST(Coarsen, PathIntoTwoPairs) {
  const Graph c = coarsen(path_graph(4), ClusterAssignment({0, 0, 1, 1}, 2));
  EXPECT_EQ(max_abs_diff(c.adjacency, Tensor::matrix({{1, 1}, {1, 1}})), 0.0);
  EXPECT_EQ(c.num_nodes(), 2u);
}

TEST(Coarsen, TriangleIntoOneNode) {
  const Graph tri = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  EXPECT_EQ(coarsen(tri, ClusterAssignment({0, 0, 0}, 1)).adjacency.item(), 3.0);
}

TEST(Coarsen, MatchesDefiningSums) {
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.index(12);
    const std::size_t k = 1 + rng.index(n);
    const Graph g = oracle::random_graph(n, rng.uniform(), rng);
    const ClusterAssignment pi = random_partition(n, k, rng);
    EXPECT_EQ(max_abs_diff(coarsen_adjacency(g.adjacency, pi), oracle::coarsen(g.adjacency, pi.labels(), k)), 0.0);
  }
}

TEST(Coarsen, PreservesTotalWeight) {
  Rng rng(19);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(10);
    const Graph g = oracle::random_graph(n, 0.5, rng);
    const Graph c = coarsen(g, random_partition(n, 1 + rng.index(n), rng));
    EXPECT_EQ(c.total_weight(), static_cast<double>(g.num_edges()));
  }
}

TEST(Coarsen, PermutationCovariant) {
  Rng rng(23);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const Graph g = oracle::random_graph(n, 0.5, rng);
      const ClusterAssignment pi = random_partition(n, 1 + rng.index(n), rng);
      const auto sigma = oracle::random_permutation(n, rng);
      const Tensor lhs = coarsen_adjacency(permute_graph(g, sigma).adjacency, pi.permuted(sigma));
      EXPECT_EQ(max_abs_diff(lhs, coarsen_adjacency(g.adjacency, pi)), 0.0);
    }
  }
}

TEST(Coarsen, RejectsNonOneHotMatrix) {
  EXPECT_THROW(coarsen(path_graph(2), Tensor::matrix({{1, 1}, {0, 1}})), DomainError);
}

TEST(SynthCommunity, DegenerateProbabilities) {
  CommunityOptions o;
  o.n_min = o.n_max = 4;
  o.count = 3;
  o.p_in = 1.0;
  o.p_out = 0.0;
  for (const Graph& g : synth_community(o, 0)) {
    EXPECT_EQ(g.num_edges(), 2u);
    EXPECT_EQ(g.weight(0, 1), 1.0);
    EXPECT_EQ(g.weight(2, 3), 1.0);
  }
  o.p_in = 0.0;
  for (const Graph& g : synth_community(o, 0)) EXPECT_EQ(g.num_edges(), 0u);
}

TEST(SynthCommunity, DeterministicUnderSeed) {
  CommunityOptions o;
  o.count = 10;
  const auto a = synth_community(o, 7);
  const auto b = synth_community(o, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(max_abs_diff(a[i].adjacency, b[i].adjacency), 0.0);
}

TEST(SynthCommunity, SizesAndErrors) {
  CommunityOptions o;
  o.count = 50;
  for (const Graph& g : synth_community(o, 1)) {
    EXPECT_GE(g.num_nodes(), 12u);
    EXPECT_LE(g.num_nodes(), 20u);
  }
  const auto labels = community_labels(5);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), 0u), 3);
  o.n_max = 3;
  EXPECT_THROW(synth_community(o, 0), DomainError);
}

TEST(SynthCommunity, IntraDensityExceedsInter) {
  CommunityOptions o;
  o.count = 200;
  std::size_t ok = 0;
  for (const Graph& g : synth_community(o, 3)) {
    const auto labels = community_labels(g.num_nodes());
    double intra = 0, intra_pairs = 0, inter = 0, inter_pairs = 0;
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      for (std::size_t j = i + 1; j < g.num_nodes(); ++j) {
        const bool same = labels[i] == labels[j];
        (same ? intra_pairs : inter_pairs) += 1;
        if (g.weight(i, j) > 0) (same ? intra : inter) += 1;
      }
    }
    if (intra / intra_pairs > inter / inter_pairs) ++ok;
  }
  EXPECT_GE(ok, 190u);
}

TEST(MaskEdges, HundredEdgeSplit) {
  Rng rng(2);
  std::vector<WeightedEdge> edges;
  std::set<NodePair> seen;
  while (edges.size() < 100) {
    std::size_t u = rng.index(30), v = rng.index(30);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (seen.insert({u, v}).second) edges.push_back({u, v, 1.0});
  }
  const Graph g = make_graph(30, edges);
  const EdgeSplit s = mask_edges(g, 0.05, 0.10, 0);
  EXPECT_EQ(s.train_graph.num_edges(), 85u);
  EXPECT_EQ(s.train_pos.size(), 85u);
  EXPECT_EQ(s.val_pos.size(), 5u);
  EXPECT_EQ(s.val_neg.size(), 5u);
  EXPECT_EQ(s.test_pos.size(), 10u);
  EXPECT_EQ(s.test_neg.size(), 10u);

  std::set<NodePair> all(s.train_pos.begin(), s.train_pos.end());
  all.insert(s.val_pos.begin(), s.val_pos.end());
  all.insert(s.test_pos.begin(), s.test_pos.end());
  EXPECT_EQ(all, seen);

  std::set<NodePair> negatives;
  for (const auto* list : {&s.val_neg, &s.test_neg}) {
    for (const NodePair& p : *list) {
      EXPECT_NE(p.first, p.second);
      EXPECT_EQ(seen.count({std::min(p.first, p.second), std::max(p.first, p.second)}), 0u);
      EXPECT_TRUE(negatives.insert(p).second);
    }
  }

  const EdgeSplit again = mask_edges(g, 0.05, 0.10, 0);
  EXPECT_EQ(again.val_pos, s.val_pos);
  EXPECT_EQ(again.test_neg, s.test_neg);
}

TEST(MaskEdges, TooFewEdges) {
  EXPECT_THROW(mask_edges(path_graph(6), 0.05, 0.10, 0), DomainError);
}
