#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mgvae/assignment.hpp"
#include "mgvae/tensor.hpp"

namespace mgvae {

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double w = 1.0;
};

using NodePair = std::pair<std::size_t, std::size_t>;

// Undirected weighted graph with dense storage.
//
//   adjacency      (n, n)       symmetric, non-negative
//   node_features  (n, d_v)     may be tracked (pooled latents of a finer level)
//   edge_features  (n, n, d_e)  d_e may be zero
struct Graph {
  Tensor adjacency;
  Tensor node_features;
  Tensor edge_features;

  std::size_t num_nodes() const { return adjacency.dim() == 2 ? adjacency.size(0) : 0; }
  std::size_t feature_dim() const { return node_features.dim() == 2 ? node_features.size(1) : 0; }
  std::size_t edge_feature_dim() const {
    return edge_features.dim() == 3 ? edge_features.size(2) : 0;
  }
  double weight(std::size_t i, std::size_t j) const {
    return adjacency.data()[i * num_nodes() + j];
  }
  // Unordered pairs i < j with positive weight.
  std::vector<NodePair> edges() const;
  std::size_t num_edges() const { return edges().size(); }
  // Total edge weight: off-diagonal entries counted once per unordered pair,
  // diagonal entries (intra-cluster edges of a coarse node) in full.
  double total_weight() const;
};

inline constexpr std::size_t kDegreeBuckets = 8;

// One-hot degree buckets 0..6 and 7+, from the binarized adjacency (ignoring
// the diagonal).
Tensor degree_bucket_features(const Tensor& adjacency);

// Builds a graph from an edge list. Edges are symmetrized; repeated edges keep
// the last weight. Missing features default to degree buckets.
Graph make_graph(std::size_t n, const std::vector<WeightedEdge>& edges,
                 std::optional<Tensor> node_features = std::nullopt);
Graph make_graph_from_adjacency(Tensor adjacency, std::optional<Tensor> node_features = std::nullopt);

enum class GraphFormat { kEdgeList, kJson };

// Edge list: optional "# nodes <n>" header, then "u v [w]" per line,
// 0-indexed, weight defaulting to 1. JSON: {"n", "edges": [[u, v, w]...],
// "node_features": [[...]...]}. Throws FormatError.
Graph load_graph(const std::filesystem::path& path, GraphFormat format);
Graph load_graph(const std::filesystem::path& path);  // format from extension
Graph parse_edge_list(std::istream& in);
Graph parse_graph_json(const std::string& text);
std::string graph_to_json(const Graph& g, bool include_features = true);
void save_graph_json(const std::filesystem::path& path, const Graph& g, bool include_features = true);

// Restriction to `nodes`, in the given order. Throws DomainError on duplicate
// or out-of-range nodes. Node features are gathered on the tape.
Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& nodes);

// Coarse adjacency ΠᵀAΠ with the diagonal halved: entry (k, k) counts the
// edges inside cluster k, entry (k, k') the edges between clusters.
Tensor coarsen_adjacency(const Tensor& adjacency, const ClusterAssignment& pi);
// Coarse graph with K nodes; node features are left empty (K, 0) and are
// filled in by the pooling network.
Graph coarsen(const Graph& g, const ClusterAssignment& pi);
Graph coarsen(const Graph& g, const Tensor& pi_matrix);

// σ·G for the node permutation σ (node i moves to position σ(i)).
Graph permute_graph(const Graph& g, const std::vector<std::size_t>& sigma);

struct CommunityOptions {
  std::size_t n_min = 12;
  std::size_t n_max = 20;
  std::size_t count = 100;
  double p_in = 0.7;
  double p_out = 0.05;
};

// Two-community random graphs: |V| uniform in [n_min, n_max], nodes
// 0..ceil(n/2)-1 form the first community, the rest the second.
std::vector<Graph> synth_community(const CommunityOptions& options, std::uint64_t seed);
std::vector<std::size_t> community_labels(std::size_t n);

struct EdgeSplit {
  Graph train_graph;
  std::vector<NodePair> train_pos, train_neg;
  std::vector<NodePair> val_pos, val_neg;
  std::vector<NodePair> test_pos, test_neg;
};

// Holds out val_frac/test_frac of the edges (uniformly at random) with an
// equal number of sampled non-edges per split (the train negatives are capped
// by the non-edges left over). Throws DomainError when the
// graph has fewer than 20 edges or a split would be empty.
EdgeSplit mask_edges(const Graph& g, double val_frac, double test_frac, std::uint64_t seed);

}  // namespace mgvae
