#pragma once

#include <cstddef>
#include <vector>

#include "mgvae/graph.hpp"
#include "mgvae/tensor.hpp"

namespace mgvae {

// Orbit counts are enumerated over all 4-node subsets, up to this size.
inline constexpr std::size_t kMaxOrbitNodes = 20;
inline constexpr std::size_t kClusteringBins = 100;

struct GraphStats {
  std::vector<std::size_t> degrees;
  std::vector<double> clustering;
  std::vector<std::size_t> orbits;  // empty when n > kMaxOrbitNodes
  bool has_orbits = false;

  std::vector<double> degree_hist;      // over 0..max degree
  std::vector<double> clustering_hist;  // kClusteringBins bins over [0, 1]
  std::vector<double> orbit_hist;       // over 0..max count
};

// Statistics of the binarized adjacency (diagonal ignored).
GraphStats graph_stats(const Graph& g);

// Number of connected induced 4-node subgraphs containing each node.
std::vector<std::size_t> orbit_counts(const Tensor& adjacency);

enum class StatKind { kDegree, kClustering, kOrbit };

const char* stat_name(StatKind kind);

// sqrt(max(MMD², 0)) under k(x, y) = exp(−TV(x, y)² / (2σ²)) on histograms
// zero-padded to a common length. Throws DomainError on an empty set and
// UnsupportedError for orbits of graphs larger than kMaxOrbitNodes.
double mmd(const std::vector<GraphStats>& a, const std::vector<GraphStats>& b, StatKind which,
           double sigma = 1.0);

struct AucAp {
  double auc = 0.0;
  double ap = 0.0;
};

// Mann–Whitney AUC with ties counted ½; AP as Σ_t (R_t − R_{t−1}) P_t over
// distinct score thresholds. Throws DomainError unless both classes occur.
AucAp auc_ap(const std::vector<double>& scores, const std::vector<int>& labels);

struct EdgeMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Upper-triangle confusion metrics of predictions p > 0.5 against A > 0.
// A ratio with an empty denominator is 1 when the other side also has no
// positives and 0 otherwise.
EdgeMetrics edge_recon_metrics(const Tensor& adjacency, const Tensor& probabilities);

}  // namespace mgvae
