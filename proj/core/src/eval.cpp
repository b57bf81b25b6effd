#include "mgvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mgvae/error.hpp"

namespace mgvae {

namespace {

std::vector<std::vector<bool>> binary(const Tensor& a) {
  if (a.dim() != 2 || a.size(0) != a.size(1)) throw DimensionError("expected a square adjacency matrix");
  const std::size_t n = a.size(0);
  std::vector<std::vector<bool>> b(n, std::vector<bool>(n, false));
  const auto d = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b[i][j] = i != j && d[i * n + j] > 0.0;
  return b;
}

std::vector<double> count_hist(const std::vector<std::size_t>& values) {
  if (values.empty()) return {};
  std::vector<double> h(*std::max_element(values.begin(), values.end()) + 1, 0.0);
  for (std::size_t v : values) h[v] += 1.0;
  for (double& x : h) x /= static_cast<double>(values.size());
  return h;
}

const std::vector<double>& pick(const GraphStats& s, StatKind which) {
  switch (which) {
    case StatKind::kDegree: return s.degree_hist;
    case StatKind::kClustering: return s.clustering_hist;
    case StatKind::kOrbit:
      if (!s.has_orbits) {
        throw UnsupportedError("orbit statistics are limited to graphs with at most " +
                               std::to_string(kMaxOrbitNodes) + " nodes, got " +
                               std::to_string(s.degrees.size()));
      }
      return s.orbit_hist;
  }
  return s.degree_hist;
}

double tv(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::max(x.size(), y.size()); ++i) {
    s += std::abs((i < x.size() ? x[i] : 0.0) - (i < y.size() ? y[i] : 0.0));
  }
  return 0.5 * s;
}

}  // namespace

std::vector<std::size_t> orbit_counts(const Tensor& adjacency) {
  const auto b = binary(adjacency);
  const std::size_t n = b.size();
  std::vector<std::size_t> out(n, 0);
  std::size_t v[4];
  for (v[0] = 0; v[0] < n; ++v[0])
    for (v[1] = v[0] + 1; v[1] < n; ++v[1])
      for (v[2] = v[1] + 1; v[2] < n; ++v[2])
        for (v[3] = v[2] + 1; v[3] < n; ++v[3]) {
          // Connectivity by flood fill from the first vertex.
          unsigned seen = 1, frontier = 1;
          while (frontier) {
            unsigned next = 0;
            for (int i = 0; i < 4; ++i) {
              if (!(frontier >> i & 1u)) continue;
              for (int j = 0; j < 4; ++j)
                if (!(seen >> j & 1u) && b[v[i]][v[j]]) next |= 1u << j;
            }
            seen |= next;
            frontier = next;
          }
          if (seen == 0xFu)
            for (std::size_t u : v) ++out[u];
        }
  return out;
}

GraphStats graph_stats(const Graph& g) {
  const auto b = binary(g.adjacency);
  const std::size_t n = b.size();
  GraphStats s;
  s.degrees.assign(n, 0);
  s.clustering.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s.degrees[i] += b[i][j];
  for (std::size_t v = 0; v < n; ++v) {
    const std::size_t d = s.degrees[v];
    if (d < 2) continue;
    std::size_t tri = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) tri += b[v][i] && b[v][j] && b[i][j];
    s.clustering[v] = 2.0 * static_cast<double>(tri) / static_cast<double>(d * (d - 1));
  }
  s.degree_hist = count_hist(s.degrees);
  if (n > 0) {
    s.clustering_hist.assign(kClusteringBins, 0.0);
    for (double c : s.clustering) {
      const auto bin = std::min(kClusteringBins - 1, static_cast<std::size_t>(c * kClusteringBins));
      s.clustering_hist[bin] += 1.0 / static_cast<double>(n);
    }
  }
  if (n <= kMaxOrbitNodes) {
    s.orbits = orbit_counts(g.adjacency);
    s.orbit_hist = count_hist(s.orbits);
    s.has_orbits = true;
  }
  return s;
}

const char* stat_name(StatKind kind) {
  switch (kind) {
    case StatKind::kDegree: return "degree";
    case StatKind::kClustering: return "cluster";
    case StatKind::kOrbit: return "orbit";
  }
  return "degree";
}

double mmd(const std::vector<GraphStats>& a, const std::vector<GraphStats>& b, StatKind which, double sigma) {
  if (a.empty() || b.empty()) throw DomainError("mmd: both graph sets must be nonempty");
  if (!(sigma > 0.0)) throw DomainError("mmd: kernel width must be positive");
  const double denom = 2.0 * sigma * sigma;
  auto mean_kernel = [&](const std::vector<GraphStats>& x, const std::vector<GraphStats>& y) {
    double s = 0.0;
    for (const auto& p : x)
      for (const auto& q : y) {
        const double t = tv(pick(p, which), pick(q, which));
        s += std::exp(-t * t / denom);
      }
    return s / static_cast<double>(x.size() * y.size());
  };
  const double m2 = mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b);
  return std::sqrt(std::max(m2, 0.0));
}

AucAp auc_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc_ap: scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw DomainError("auc_ap: labels must be 0 or 1");
    pos += static_cast<std::size_t>(l);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DomainError("auc_ap: need at least one positive and one negative label");
  for (double s : scores)
    if (std::isnan(s)) throw NumericError("auc_ap: NaN score");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });

  // Walk tied groups from the highest score down.
  double pairs = 0.0, ap = 0.0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i, gp = 0, gn = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      labels[idx[j]] ? ++gp : ++gn;
      ++j;
    }
    // Positives in this group beat every negative below it and tie with gn.
    pairs += static_cast<double>(gp) * (static_cast<double>(neg - fp - gn) + 0.5 * static_cast<double>(gn));
    tp += gp;
    fp += gn;
    if (gp > 0) {
      ap += static_cast<double>(gp) / static_cast<double>(pos) * static_cast<double>(tp) /
            static_cast<double>(tp + fp);
    }
    i = j;
  }
  return {pairs / (static_cast<double>(pos) * static_cast<double>(neg)), ap};
}

EdgeMetrics edge_recon_metrics(const Tensor& adjacency, const Tensor& probabilities) {
  if (adjacency.shape() != probabilities.shape() || adjacency.dim() != 2 ||
      adjacency.size(0) != adjacency.size(1)) {
    throw DimensionError("edge_recon_metrics: shapes " + shape_str(adjacency.shape()) + " and " +
                         shape_str(probabilities.shape()) + " must be equal and square");
  }
  const std::size_t n = adjacency.size(0);
  const auto a = adjacency.data();
  const auto p = probabilities.data();
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool truth = a[i * n + j] > 0.0;
      const bool pred = p[i * n + j] > 0.5;
      if (truth && pred) ++tp;
      else if (pred) ++fp;
      else if (truth) ++fn;
      else ++tn;
    }
  auto ratio = [](std::size_t num, std::size_t den, std::size_t other) {
    if (den == 0) return other == 0 ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  EdgeMetrics m;
  const std::size_t total = tp + fp + fn + tn;
  m.accuracy = total ? static_cast<double>(tp + tn) / static_cast<double>(total) : 1.0;
  m.precision = ratio(tp, tp + fp, tp + fn);
  m.recall = ratio(tp, tp + fn, tp + fp);
  return m;
}

}  // namespace mgvae
