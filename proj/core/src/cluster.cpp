#include "mgvae/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "mgvae/error.hpp"
#include "mgvae/ops.hpp"

namespace mgvae {

namespace {

using Grads = std::span<const std::span<double>>;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix to_matrix(const Tensor& t) {
  if (t.dim() != 2) throw DimensionError("expected a matrix, got " + shape_str(t.shape()));
  return Eigen::Map<const Matrix>(t.data().data(), static_cast<Eigen::Index>(t.size(0)),
                                  static_cast<Eigen::Index>(t.size(1)));
}

Tensor from_matrix(const Matrix& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, std::move(data));
}

std::size_t row_argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

GumbelSample gumbel_from_noise(const Tensor& logits, std::span<const double> noise) {
  if (logits.dim() != 2 || logits.size(1) == 0) throw DimensionError("gumbel_assign expects (n, K) logits");
  const std::size_t n = logits.size(0), k = logits.size(1);
  const auto x = logits.data();
  std::vector<std::size_t> labels(n);
  std::vector<double> score(k);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, x[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(x[i * k + j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) score[j] = noise[i * k + j] + (x[i * k + j] - lse);
    labels[i] = row_argmax(score);
  }
  GumbelSample s;
  s.assignment = ClusterAssignment(std::move(labels), k);
  s.probs = softmax_rows(logits);
  s.relaxed = straight_through(s.assignment.matrix(), s.probs);
  return s;
}

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

struct LloydRun {
  std::vector<std::size_t> labels;
  std::vector<double> centroids;
  double inertia = 0.0;
};

LloydRun lloyd(const std::vector<double>& x, std::size_t n, std::size_t d, std::size_t k, Rng& rng,
               std::size_t iterations) {
  // k-means++ seeding.
  std::vector<double> c(k * d);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy_n(&x[first * d], d, &c[0]);
  for (std::size_t m = 1; m < k; ++m) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dist[i] = std::min(dist[i], sq_dist(&x[i * d], &c[(m - 1) * d], d));
      total += dist[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc >= r && dist[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    std::copy_n(&x[pick * d], d, &c[m * d]);
  }

  LloydRun run;
  run.labels.assign(n, SIZE_MAX);
  std::vector<std::size_t> count(k);
  for (std::size_t it = 0; it < iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = sq_dist(&x[i * d], &c[0], d);
      for (std::size_t m = 1; m < k; ++m) {
        const double dm = sq_dist(&x[i * d], &c[m * d], d);
        if (dm < best_d) {
          best_d = dm;
          best = m;
        }
      }
      if (run.labels[i] != best) {
        run.labels[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::fill(c.begin(), c.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++count[run.labels[i]];
      for (std::size_t j = 0; j < d; ++j) c[run.labels[i] * d + j] += x[i * d + j];
    }
    for (std::size_t m = 0; m < k; ++m)
      if (count[m] > 0)
        for (std::size_t j = 0; j < d; ++j) c[m * d + j] /= static_cast<double>(count[m]);
    for (std::size_t m = 0; m < k; ++m) {
      if (count[m] > 0) continue;
      // Empty cluster: move its centre onto the point farthest from its own centre.
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t l = run.labels[i];
        if (count[l] <= 1) continue;
        const double di = sq_dist(&x[i * d], &c[l * d], d);
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      std::copy_n(&x[far * d], d, &c[m * d]);
      --count[run.labels[far]];
      run.labels[far] = m;
      count[m] = 1;
    }
  }
  run.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(&x[i * d], &c[0], d);
    for (std::size_t m = 1; m < k; ++m) {
      const double dm = sq_dist(&x[i * d], &c[m * d], d);
      if (dm < best_d) {
        best_d = dm;
        best = m;
      }
    }
    run.labels[i] = best;
    run.inertia += best_d;
  }
  run.centroids = std::move(c);
  return run;
}

}  // namespace

Tensor cluster_logits(const Graph& g, const LayerParams& params) {
  if (params.order != 1) throw DimensionError("cluster_logits uses a first-order stack");
  return apply_stack(g.adjacency, g.node_features, params);
}

ClusterAssignment argmax_assign(const Tensor& logits) {
  if (logits.dim() != 2 || logits.size(1) == 0) throw DimensionError("argmax_assign expects (n, K) logits");
  const std::size_t n = logits.size(0), k = logits.size(1);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = row_argmax(logits.data().subspan(i * k, k));
  return ClusterAssignment(std::move(labels), k);
}

GumbelSample gumbel_assign(const Tensor& logits, Rng& rng) {
  std::vector<double> noise(logits.numel());
  for (double& v : noise) v = rng.gumbel();
  return gumbel_from_noise(logits, noise);
}

GumbelSample gumbel_assign(const Tensor& logits, std::uint64_t seed) {
  Rng rng(seed);
  return gumbel_assign(logits, rng);
}

GumbelSample gumbel_assign_with_noise(const Tensor& logits, const Tensor& noise) {
  if (noise.shape() != logits.shape()) throw DimensionError("gumbel noise shape mismatch");
  return gumbel_from_noise(logits, noise.data());
}

double balance_kl(const ClusterAssignment& pi) {
  const std::size_t n = pi.num_nodes(), k = pi.num_clusters();
  if (n == 0 || k == 0) return 0.0;
  double kl = 0.0;
  for (std::size_t s : pi.sizes()) {
    if (s == 0) continue;
    const double p = static_cast<double>(s) / static_cast<double>(n);
    kl += p * std::log(p * static_cast<double>(k));
  }
  return std::max(kl, 0.0);
}

Tensor balance_kl(const Tensor& pi_matrix) {
  if (pi_matrix.dim() != 2 || pi_matrix.size(0) == 0) throw DimensionError("balance_kl expects (n, K)");
  const std::size_t k = pi_matrix.size(1);
  const Tensor p = mean_rows(pi_matrix);
  const auto pd = p.data();
  double kl = 0.0;
  std::vector<double> grad(k);
  constexpr double kFloor = 1e-6;
  for (std::size_t j = 0; j < k; ++j) {
    if (pd[j] > 0.0) kl += pd[j] * std::log(pd[j] * static_cast<double>(k));
    grad[j] = std::log(std::max(pd[j], kFloor) * static_cast<double>(k)) + 1.0;
  }
  return Tensor::from_op({}, {kl}, {p}, [grad = std::move(grad)](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (std::size_t j = 0; j < grad.size(); ++j) gi[0][j] += g[0] * grad[j];
  });
}

BalanceStats cluster_stats(const ClusterAssignment& pi) {
  BalanceStats s;
  const auto sizes = pi.sizes();
  if (sizes.empty()) return s;
  s.min = *std::min_element(sizes.begin(), sizes.end());
  s.max = *std::max_element(sizes.begin(), sizes.end());
  const double mean = static_cast<double>(pi.num_nodes()) / static_cast<double>(sizes.size());
  double var = 0.0;
  for (std::size_t v : sizes) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  s.std = std::sqrt(var / static_cast<double>(sizes.size()));
  s.kl = balance_kl(pi);
  return s;
}

KMeansResult kmeans(const Tensor& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t iterations) {
  if (points.dim() != 2) throw DimensionError("kmeans expects an (n, d) matrix");
  const std::size_t n = points.size(0), d = points.size(1);
  if (k == 0) throw DomainError("kmeans needs K >= 1");
  if (n < k) throw DomainError("kmeans: " + std::to_string(n) + " points for " + std::to_string(k) + " clusters");
  const std::vector<double> x(points.data().begin(), points.data().end());
  Rng root(seed);
  LloydRun best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Rng rng = root.split(r);
    LloydRun run = lloyd(x, n, d, k, rng, iterations);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  KMeansResult out;
  out.assignment = ClusterAssignment(best.labels, k);
  out.centroids = Tensor({k, d}, best.centroids);
  out.inertia = best.inertia;
  return out;
}

Tensor pca(const Tensor& points, std::size_t dims) {
  Matrix x = to_matrix(points);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::Index keep = std::min<Eigen::Index>(static_cast<Eigen::Index>(dims), x.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(x.transpose() * x));
  // Eigenvalues are ascending; take the trailing `keep` axes in reverse order.
  Eigen::MatrixXd axes(x.cols(), keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    Eigen::VectorXd v = eig.eigenvectors().col(x.cols() - 1 - j);
    // Fix the sign so that the largest-magnitude component is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(j) = v;
  }
  return from_matrix(x * axes);
}

Tensor spectral_embedding(const Graph& g, std::size_t n_max) {
  const std::size_t n = g.num_nodes();
  if (n <= n_max) {
    throw DomainError("spectral embedding needs more than " + std::to_string(n_max) + " nodes, graph has " +
                      std::to_string(n));
  }
  const Matrix a = to_matrix(g.adjacency);
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd deg = a.rowwise().sum();
  std::vector<bool> isolated(n);
  for (Eigen::Index i = 0; i < N; ++i) {
    isolated[i] = deg(i) <= 0.0;
    if (isolated[i]) deg(i) = 1.0;
  }
  const Eigen::VectorXd inv_sqrt = deg.cwiseSqrt().cwiseInverse();
  // Symmetric form I - D^{-1/2} A D^{-1/2}; it shares eigenvalues with
  // D⁻¹(D - A), and ξ = D^{-1/2} u maps its eigenvectors back.
  Eigen::MatrixXd ls = -(inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal());
  for (Eigen::Index i = 0; i < N; ++i) ls(i, i) += isolated[i] ? 0.0 : 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(ls);
  if (eig.info() != Eigen::Success) throw NumericError("Laplacian eigendecomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::MatrixXd& u = eig.eigenvectors();

  constexpr double kZero = 1e-9;
  Eigen::Index zeros = 0;
  while (zeros < N && lambda(zeros) < kZero) ++zeros;

  std::vector<Eigen::VectorXd> cols;
  if (zeros > 1) {
    // Null space minus the constant direction D^{1/2} 1.
    const Eigen::VectorXd t = deg.cwiseSqrt().normalized();
    Eigen::MatrixXd z = u.leftCols(zeros);
    z -= t * (t.transpose() * z);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU);
    for (Eigen::Index j = 0; j < zeros - 1 && cols.size() < n_max; ++j) {
      if (svd.singularValues()(j) < 1e-6) break;
      cols.push_back(inv_sqrt.asDiagonal() * svd.matrixU().col(j));
    }
  }
  for (Eigen::Index j = zeros; j < N && cols.size() < n_max; ++j) {
    cols.push_back(inv_sqrt.asDiagonal() * u.col(j) / lambda(j));
  }
  Matrix e(N, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) e.col(static_cast<Eigen::Index>(j)) = cols[j];
  return from_matrix(e);
}

ClusterAssignment spectral_baseline(const Graph& g, std::size_t k, std::uint64_t seed, std::size_t n_max) {
  return kmeans(spectral_embedding(g, n_max), k, seed).assignment;
}

ClusterAssignment kmeans_baseline(const Tensor& features, std::size_t k, std::uint64_t seed) {
  if (features.dim() != 2) throw DimensionError("kmeans_baseline expects (n, d) features");
  const Tensor x = features.size(1) > 10 ? pca(features, 10) : features.detach();
  return kmeans(x, k, seed).assignment;
}

}  // namespace mgvae
