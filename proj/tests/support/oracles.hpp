#pragma once

// Independent reference implementations used only by the tests. Each one is
// written for clarity rather than speed and shares no code with the library.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mgvae/graph.hpp"
#include "mgvae/rng.hpp"
#include "mgvae/tensor.hpp"

namespace oracle {

using mgvae::Tensor;

// Sums A over every full index tuple whose contracted axes agree.
Tensor contract(const Tensor& a, const std::vector<std::size_t>& axes);

// Materializes T = A ⊗ H (order 4 per channel) and contracts each of the six
// axis pairs explicitly; output (n, n, 6d).
Tensor pair_contractions(const Tensor& adjacency, const Tensor& h);

// Ã[k, l] from the defining double sums, diagonal halved.
Tensor coarsen(const Tensor& adjacency, const std::vector<std::size_t>& labels, std::size_t k);

// Connected induced 4-node subgraphs per node, found by growing connected
// node sets one neighbour at a time and deduplicating them.
std::vector<std::size_t> orbit_counts(const Tensor& adjacency);

// Fraction of (positive, negative) pairs ranked correctly, ties ½.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Minimum total cost over all n! assignments.
double min_assignment_cost(const std::vector<double>& cost, std::size_t n);

// Gaussian KL from explicit inverses and log-determinants (LU based).
double gaussian_kl(const std::vector<double>& mu, const std::vector<double>& sigma,
                   const std::vector<double>& mu_hat, const std::vector<double>& sigma_hat, std::size_t n);

// Random helpers.
std::vector<std::size_t> random_permutation(std::size_t n, mgvae::Rng& rng);
Tensor random_tensor(mgvae::Shape shape, mgvae::Rng& rng, bool requires_grad = false);
Tensor random_symmetric(std::size_t n, mgvae::Rng& rng);
mgvae::Graph random_graph(std::size_t n, double p, mgvae::Rng& rng);

}  // namespace oracle
