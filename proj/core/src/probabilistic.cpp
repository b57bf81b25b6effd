#include "mgvae/probabilistic.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "mgvae/equivariant.hpp"
#include "mgvae/error.hpp"
#include "mgvae/ops.hpp"

namespace mgvae {

namespace {

using Grads = std::span<const std::span<double>>;

void check_state(const GaussianState& s, const char* who) {
  if (s.mu.dim() != 2 || s.L.dim() != 3 || s.L.size(0) != s.mu.size(0) || s.L.size(2) != s.mu.size(1)) {
    throw DimensionError(std::string(who) + ": inconsistent Gaussian state, mu " + shape_str(s.mu.shape()) +
                         ", L " + shape_str(s.L.shape()));
  }
}

// Σ_c = L_c L_cᵀ for channel c of an (n, r, d) factor.
Eigen::MatrixXd channel_factor(const Tensor& L, std::size_t c) {
  const std::size_t n = L.size(0), r = L.size(1), d = L.size(2);
  const auto ld = L.data();
  Eigen::MatrixXd f(n, r);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < r; ++j) f(i, j) = ld[(i * r + j) * d + c];
  return f;
}

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& m, const char* which, std::size_t channel) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    std::ostringstream os;
    os << "gaussian_kl: " << which << " covariance of channel " << channel
       << " is not positive definite after jitter (min eigenvalue " << ev.minCoeff() << ", max eigenvalue "
       << ev.maxCoeff() << ", min diagonal " << m.diagonal().minCoeff() << ")";
    throw NumericError(os.str());
  }
  return llt;
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::MatrixXd& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

}  // namespace

LearnablePrior make_learnable_prior(std::size_t m, std::size_t d_z, Rng& rng) {
  LearnablePrior p;
  std::vector<double> mu(m * d_z);
  for (double& v : mu) v = rng.normal();
  p.mu_hat = Tensor({m, d_z}, std::move(mu), true);
  std::vector<double> l(m * m * d_z, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t c = 0; c < d_z; ++c) l[(i * m + i) * d_z + c] = 1.0;
  p.L_hat = Tensor({m, m, d_z}, std::move(l), true);
  return p;
}

GaussianState standard_prior(std::size_t n, std::size_t d_z) {
  return {Tensor::zeros({n, d_z}), diag_embed(Tensor::full({n, d_z}, 1.0)), true};
}

Tensor diag_embed(const Tensor& sigma) {
  if (sigma.dim() != 2) throw DimensionError("diag_embed expects (n, d)");
  const std::size_t n = sigma.size(0), d = sigma.size(1);
  std::vector<double> out(n * n * d, 0.0);
  const auto s = sigma.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out[(i * n + i) * d + c] = s[i * d + c];
  return Tensor::from_op({n, n, d}, std::move(out), {sigma}, [n, d](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) gi[0][i * d + c] += g[(i * n + i) * d + c];
  });
}

Tensor factor_apply(const Tensor& L, const Tensor& eps) {
  if (L.dim() != 3 || eps.dim() != 2 || L.size(1) != eps.size(0) || L.size(2) != eps.size(1)) {
    throw DimensionError("factor_apply: factor " + shape_str(L.shape()) + " and noise " + shape_str(eps.shape()));
  }
  const std::size_t n = L.size(0), r = L.size(1), d = L.size(2);
  const auto ld = L.data();
  const auto ed = eps.data();
  std::vector<double> out(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t c = 0; c < d; ++c) out[i * d + c] += ld[(i * r + j) * d + c] * ed[j * d + c];
  return Tensor::from_op({n, d}, std::move(out), {L, eps}, [L, eps, n, r, d](std::span<const double> g, Grads gi) {
    const auto ld = L.data();
    const auto ed = eps.data();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < r; ++j)
        for (std::size_t c = 0; c < d; ++c) {
          const double gv = g[i * d + c];
          if (!gi[0].empty()) gi[0][(i * r + j) * d + c] += gv * ed[j * d + c];
          if (!gi[1].empty()) gi[1][j * d + c] += gv * ld[(i * r + j) * d + c];
        }
  });
}

Tensor sample(const GaussianState& state, const Tensor& eps) {
  check_state(state, "sample");
  if (eps.shape() != state.mu.shape()) {
    throw DimensionError("sample: noise " + shape_str(eps.shape()) + " does not match mean " +
                         shape_str(state.mu.shape()));
  }
  if (state.diagonal) return add(state.mu, mul(diagonal(state.L), eps));
  return add(state.mu, factor_apply(state.L, eps));
}

Tensor standard_normal(std::size_t n, std::size_t d, Rng& rng) {
  std::vector<double> data(n * d);
  for (double& v : data) v = rng.normal();
  return Tensor({n, d}, std::move(data));
}

Tensor gaussian_kl(const GaussianState& post, const GaussianState& prior, double jitter) {
  check_state(post, "gaussian_kl");
  check_state(prior, "gaussian_kl");
  if (post.mu.shape() != prior.mu.shape() || post.L.size(1) != post.L.size(0)) {
    throw DimensionError("gaussian_kl: posterior " + shape_str(post.mu.shape()) + " vs prior " +
                         shape_str(prior.mu.shape()));
  }
  if (!(jitter >= 0.0)) throw DomainError("gaussian_kl: negative jitter");
  const std::size_t n = post.mu.size(0), d = post.mu.size(1);
  const std::size_t rp = prior.L.size(1);
  const auto mu = post.mu.data();
  const auto mu_hat = prior.mu.data();

  double total = 0.0;
  // Per-channel gradient pieces, kept for the backward pass.
  std::vector<Eigen::MatrixXd> grad_l(d), grad_lp(d);
  std::vector<Eigen::VectorXd> pinv_diff(d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < d; ++c) {
    const Eigen::MatrixXd l = channel_factor(post.L, c);
    const Eigen::MatrixXd lp = channel_factor(prior.L, c);
    const Eigen::MatrixXd s = l * l.transpose() + jitter * eye;
    const Eigen::MatrixXd p = lp * lp.transpose() + jitter * eye;
    const auto llt_s = factorize(s, "posterior", c);
    const auto llt_p = factorize(p, "prior", c);
    const Eigen::MatrixXd p_inv = llt_p.solve(eye);
    const Eigen::MatrixXd s_inv = llt_s.solve(eye);
    Eigen::VectorXd diff(n);
    for (std::size_t i = 0; i < n; ++i) diff(i) = mu_hat[i * d + c] - mu[i * d + c];
    const Eigen::VectorXd pd = p_inv * diff;
    total += 0.5 * ((p_inv * s).trace() + diff.dot(pd) - static_cast<double>(n) + log_det(llt_p) - log_det(llt_s));

    const Eigen::MatrixXd g_s = 0.5 * (p_inv - s_inv);
    const Eigen::MatrixXd g_p = 0.5 * (p_inv - p_inv * s * p_inv - pd * pd.transpose());
    grad_l[c] = 2.0 * g_s * l;
    grad_lp[c] = 2.0 * g_p * lp;
    pinv_diff[c] = pd;
  }

  return Tensor::from_op(
      {}, {total}, {post.mu, post.L, prior.mu, prior.L},
      [n, d, rp, grad_l = std::move(grad_l), grad_lp = std::move(grad_lp),
       pinv_diff = std::move(pinv_diff)](std::span<const double> g, Grads gi) {
        const double go = g[0];
        for (std::size_t c = 0; c < d; ++c) {
          for (std::size_t i = 0; i < n; ++i) {
            if (!gi[0].empty()) gi[0][i * d + c] -= go * pinv_diff[c](i);
            if (!gi[2].empty()) gi[2][i * d + c] += go * pinv_diff[c](i);
            if (!gi[1].empty())
              for (std::size_t j = 0; j < n; ++j) gi[1][(i * n + j) * d + c] += go * grad_l[c](i, j);
            if (!gi[3].empty())
              for (std::size_t j = 0; j < rp; ++j) gi[3][(i * rp + j) * d + c] += go * grad_lp[c](i, j);
          }
        }
      });
}

Tensor gaussian_kl(const GaussianState& post, const LearnablePrior& prior, double jitter) {
  return gaussian_kl(post, prior.state(), jitter);
}

std::vector<std::size_t> free_match(const Tensor& mu, const Tensor& mu_hat) {
  if (mu.dim() != 2 || mu_hat.dim() != 2 || mu.size(1) != mu_hat.size(1)) {
    throw DimensionError("free_match: mean shapes " + shape_str(mu.shape()) + " and " + shape_str(mu_hat.shape()));
  }
  const std::size_t n = mu.size(0), m = mu_hat.size(0), d = mu.size(1);
  if (m == 0) throw DimensionError("free_match: empty prior");
  const auto a = mu.data();
  const auto b = mu_hat.data();
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (a[i * d + c] - b[j * d + c]) * (a[i * d + c] - b[j * d + c]);
      if (s < best) {
        best = s;
        out[i] = j;
      }
    }
  }
  return out;
}

std::vector<std::size_t> hungarian(const std::vector<double>& cost, std::size_t n) {
  if (cost.size() != n * n) throw DimensionError("hungarian: cost matrix must be square");
  // Shortest augmenting paths with row/column potentials, 1-indexed.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

std::vector<std::size_t> hungarian_match(const Tensor& mu, const Tensor& mu_hat) {
  if (mu.dim() != 2 || mu_hat.dim() != 2 || mu.size(1) != mu_hat.size(1)) {
    throw DimensionError("hungarian_match: mean shapes " + shape_str(mu.shape()) + " and " +
                         shape_str(mu_hat.shape()));
  }
  const std::size_t n = mu.size(0), d = mu.size(1);
  if (mu_hat.size(0) != n) {
    throw DimensionError("hungarian_match needs equal sizes, got " + std::to_string(n) + " and " +
                         std::to_string(mu_hat.size(0)));
  }
  const auto a = mu.data();
  const auto b = mu_hat.data();
  std::vector<double> cost(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (a[i * d + c] - b[j * d + c]) * (a[i * d + c] - b[j * d + c]);
      cost[i * n + j] = std::sqrt(s);
    }
  return hungarian(cost, n);
}

Tensor matched_kl(const GaussianState& post, const LearnablePrior& prior, MatchMode mode, double jitter) {
  check_state(post, "matched_kl");
  const std::vector<std::size_t> match =
      mode == MatchMode::kFree ? free_match(post.mu, prior.mu_hat) : hungarian_match(post.mu, prior.mu_hat);
  const GaussianState aligned{gather_rows(prior.mu_hat, match), gather_rows(prior.L_hat, match), false};
  return gaussian_kl(post, aligned, jitter);
}

}  // namespace mgvae
