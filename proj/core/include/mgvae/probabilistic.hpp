#pragma once

#include <cstddef>
#include <vector>

#include "mgvae/rng.hpp"
#include "mgvae/tensor.hpp"

namespace mgvae {

inline constexpr double kDefaultJitter = 1e-4;

// d_z independent n-dimensional Gaussians: channel c has mean mu[:, c] and
// covariance L_c L_cᵀ with L_c = L[:, :, c].
struct GaussianState {
  Tensor mu;        // (n, d_z)
  Tensor L;         // (n, r, d_z), r = n for posteriors
  bool diagonal = false;

  std::size_t num_nodes() const { return mu.size(0); }
  std::size_t channels() const { return mu.size(1); }
};

// Trainable prior N(μ̂, L̂L̂ᵀ) with support size m.
struct LearnablePrior {
  Tensor mu_hat;  // (m, d_z)
  Tensor L_hat;   // (m, m, d_z)

  std::size_t support() const { return mu_hat.size(0); }
  std::size_t channels() const { return mu_hat.size(1); }
  std::vector<Tensor> parameters() const { return {mu_hat, L_hat}; }
  GaussianState state() const { return {mu_hat, L_hat, false}; }
};

// μ̂ ~ N(0, 1) entries so that free matching starts from distinct rows, L̂ = I.
LearnablePrior make_learnable_prior(std::size_t m, std::size_t d_z, Rng& rng);
// N(0, I) over n nodes.
GaussianState standard_prior(std::size_t n, std::size_t d_z);

// (n, d) -> (n, n, d) with sigma on the diagonal.
Tensor diag_embed(const Tensor& sigma);
// Z[:, c] = L_c ε[:, c] for L of shape (n, r, d) and ε of shape (r, d).
Tensor factor_apply(const Tensor& L, const Tensor& eps);

// Reparameterized draw Z = μ + L ε.
Tensor sample(const GaussianState& state, const Tensor& eps);
// Standard-normal (n, d) draw.
Tensor standard_normal(std::size_t n, std::size_t d, Rng& rng);

// Σ_c KL(N(μ_c, Σ_c) || N(μ̂_c, Σ̂_c)) where both covariances receive
// jitter·I before factorization. The prior factor may be rectangular
// (n, r, d), as produced by gathering rows of a larger prior.
// Throws NumericError when a jittered covariance is not positive definite.
Tensor gaussian_kl(const GaussianState& post, const GaussianState& prior, double jitter = kDefaultJitter);
// Prior with support equal to n, aligned row by row.
Tensor gaussian_kl(const GaussianState& post, const LearnablePrior& prior, double jitter = kDefaultJitter);

// assignment[i] = argmin_j ||μ_i − μ̂_j||, ties to the lowest j.
std::vector<std::size_t> free_match(const Tensor& mu, const Tensor& mu_hat);
// Minimum total cost bijection under C[i, j] = ||μ_i − μ̂_j||; requires n = m.
std::vector<std::size_t> hungarian_match(const Tensor& mu, const Tensor& mu_hat);
// Minimum-cost perfect matching on a square cost matrix (row -> column).
std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n);

enum class MatchMode { kFree, kHungarian };

// Prior rows (and the matching rows of L̂) aligned to the posterior rows by
// the matcher, then gaussian_kl. The matching is a constant of the step.
Tensor matched_kl(const GaussianState& post, const LearnablePrior& prior, MatchMode mode,
                  double jitter = kDefaultJitter);

}  // namespace mgvae
