#pragma once

#include <cstddef>
#include <cstdint>

#include "mgvae/assignment.hpp"
#include "mgvae/equivariant.hpp"
#include "mgvae/graph.hpp"
#include "mgvae/rng.hpp"
#include "mgvae/tensor.hpp"

namespace mgvae {

// Raw (n, K) cluster logits from a first-order stack over the graph.
Tensor cluster_logits(const Graph& g, const LayerParams& params);

// Row-wise argmax; ties go to the smallest cluster index.
ClusterAssignment argmax_assign(const Tensor& logits);

struct GumbelSample {
  ClusterAssignment assignment;
  Tensor probs;    // row softmax of the logits (tracked)
  Tensor relaxed;  // one-hot forward, softmax gradient backward
};

// Gumbel-max draw: Π_i = onehot(argmax_k g_ik + log p_ik).
GumbelSample gumbel_assign(const Tensor& logits, Rng& rng);
GumbelSample gumbel_assign(const Tensor& logits, std::uint64_t seed);
// Same with explicit (n, K) noise in place of the Gumbel draws.
GumbelSample gumbel_assign_with_noise(const Tensor& logits, const Tensor& noise);

// D_KL(P || U_K) for the cluster-size fractions P, with 0 log 0 = 0.
double balance_kl(const ClusterAssignment& pi);
// Differentiable form over an (n, K) assignment matrix whose rows sum to one
// (for instance GumbelSample::relaxed).
Tensor balance_kl(const Tensor& pi_matrix);

struct BalanceStats {
  std::size_t min = 0;
  std::size_t max = 0;
  double std = 0.0;  // population standard deviation of cluster sizes
  double kl = 0.0;
};

BalanceStats cluster_stats(const ClusterAssignment& pi);

struct KMeansResult {
  ClusterAssignment assignment;
  Tensor centroids;  // (K, d)
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds, best of `restarts` by inertia.
// Throws DomainError when n < K or K = 0.
KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 20,
                    std::size_t iterations = 100);

// Projection of the centred rows onto the leading `dims` principal axes.
Tensor pca(const Tensor& points, std::size_t dims);

// Node embedding i -> (ξ_1(i)/λ_1, ..., ξ_m(i)/λ_m) from the random-walk
// Laplacian D⁻¹(D − A) with ascending eigenvalues; the constant eigenvector
// is dropped. Directions of the null space beyond the constant one
// (disconnected graphs) are kept unscaled. Throws DomainError when n <= m.
Tensor spectral_embedding(const Graph& g, std::size_t n_max = 10);

ClusterAssignment spectral_baseline(const Graph& g, std::size_t k, std::uint64_t seed,
                                    std::size_t n_max = 10);

// k-means on node features, reduced to 10 principal components when d > 10.
ClusterAssignment kmeans_baseline(const Tensor& features, std::size_t k, std::uint64_t seed);

}  // namespace mgvae
