#include "mgvae/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mgvae/error.hpp"
#include "mgvae/ops.hpp"
#include "mgvae/rng.hpp"

namespace mgvae {

using nlohmann::json;

std::vector<NodePair> Graph::edges() const {
  const std::size_t n = num_nodes();
  const auto a = adjacency.data();
  std::vector<NodePair> out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a[i * n + j] > 0.0) out.emplace_back(i, j);
  return out;
}

double Graph::total_weight() const {
  const std::size_t n = num_nodes();
  const auto a = adjacency.data();
  double diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) diag += a[i * n + i];
  return 0.5 * (std::accumulate(a.begin(), a.end(), 0.0) - diag) + diag;
}

Tensor degree_bucket_features(const Tensor& adjacency) {
  const std::size_t n = adjacency.size(0);
  const auto a = adjacency.data();
  Tensor f = Tensor::zeros({n, kDegreeBuckets});
  auto fd = f.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && a[i * n + j] > 0.0) ++deg;
    fd[i * kDegreeBuckets + std::min(deg, kDegreeBuckets - 1)] = 1.0;
  }
  return f;
}

namespace {

void validate_adjacency(const Tensor& a) {
  if (a.dim() != 2 || a.size(0) != a.size(1)) {
    throw DimensionError("adjacency must be square, got " + shape_str(a.shape()));
  }
  const std::size_t n = a.size(0);
  const auto d = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double w = d[i * n + j];
      if (!(w >= 0.0) || !std::isfinite(w)) throw FormatError("negative or non-finite edge weight");
      if (w != d[j * n + i]) throw FormatError("adjacency is not symmetric");
    }
}

Tensor empty_edge_features(std::size_t n) { return Tensor::zeros({n, n, 0}); }

}  // namespace

Graph make_graph_from_adjacency(Tensor adjacency, std::optional<Tensor> node_features) {
  validate_adjacency(adjacency);
  const std::size_t n = adjacency.size(0);
  Graph g;
  g.node_features = node_features ? *node_features : degree_bucket_features(adjacency);
  if (g.node_features.dim() != 2 || g.node_features.size(0) != n) {
    throw DimensionError("node features must have one row per node");
  }
  g.adjacency = std::move(adjacency);
  g.edge_features = empty_edge_features(n);
  return g;
}

Graph make_graph(std::size_t n, const std::vector<WeightedEdge>& edges,
                 std::optional<Tensor> node_features) {
  Tensor a = Tensor::zeros({n, n});
  auto d = a.mutable_data();
  for (const auto& e : edges) {
    if (e.u >= n || e.v >= n) {
      throw FormatError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                        ") references a node outside [0, " + std::to_string(n) + ")");
    }
    if (!(e.w >= 0.0)) throw FormatError("negative edge weight");
    d[e.u * n + e.v] = e.w;
    d[e.v * n + e.u] = e.w;
  }
  return make_graph_from_adjacency(std::move(a), std::move(node_features));
}

Graph parse_edge_list(std::istream& in) {
  std::optional<std::size_t> declared;
  std::vector<WeightedEdge> edges;
  std::size_t max_node = 0;
  bool any = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') {
      std::istringstream hs(line.substr(first + 1));
      std::string key;
      long long n = -1;
      if (hs >> key && key == "nodes") {
        if (!(hs >> n) || n < 0) throw FormatError("bad '# nodes' header on line " + std::to_string(lineno));
        declared = static_cast<std::size_t>(n);
      }
      continue;
    }
    std::istringstream ls(line);
    long long u = 0, v = 0;
    double w = 1.0;
    if (!(ls >> u >> v)) throw FormatError("cannot parse edge on line " + std::to_string(lineno));
    if (!(ls >> w)) w = 1.0;
    std::string rest;
    if (ls.clear(), ls >> rest) throw FormatError("trailing tokens on line " + std::to_string(lineno));
    if (u < 0 || v < 0) throw FormatError("negative node index on line " + std::to_string(lineno));
    if (!(w >= 0.0)) throw FormatError("negative weight on line " + std::to_string(lineno));
    edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v), w});
    max_node = std::max({max_node, static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
    any = true;
  }
  std::size_t n = any ? max_node + 1 : 0;
  if (declared) {
    if (any && max_node >= *declared) {
      throw FormatError("edge references node " + std::to_string(max_node) + " but header declares " +
                        std::to_string(*declared) + " nodes");
    }
    n = *declared;
  }
  return make_graph(n, edges);
}

Graph parse_graph_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid graph JSON: ") + e.what());
  }
  try {
    const long long n = j.at("n").get<long long>();
    if (n < 0) throw FormatError("negative node count");
    std::vector<WeightedEdge> edges;
    for (const auto& e : j.value("edges", json::array())) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) throw FormatError("edge must be [u, v] or [u, v, w]");
      const long long u = e[0].get<long long>();
      const long long v = e[1].get<long long>();
      if (u < 0 || v < 0) throw FormatError("negative node index");
      const double w = e.size() == 3 ? e[2].get<double>() : 1.0;
      edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v), w});
    }
    std::optional<Tensor> features;
    if (j.contains("node_features")) {
      const auto& rows = j.at("node_features");
      if (!rows.is_array() || rows.size() != static_cast<std::size_t>(n)) {
        throw FormatError("node_features must have one row per node");
      }
      const std::size_t d = rows.empty() ? 0 : rows[0].size();
      std::vector<double> data;
      for (const auto& r : rows) {
        if (r.size() != d) throw FormatError("ragged node_features");
        for (const auto& v : r) data.push_back(v.get<double>());
      }
      features = Tensor({static_cast<std::size_t>(n), d}, std::move(data));
    }
    return make_graph(static_cast<std::size_t>(n), edges, std::move(features));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
}

Graph load_graph(const std::filesystem::path& path, GraphFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open graph file " + path.string());
  if (format == GraphFormat::kEdgeList) return parse_edge_list(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_graph_json(ss.str());
}

Graph load_graph(const std::filesystem::path& path) {
  return load_graph(path, path.extension() == ".json" ? GraphFormat::kJson : GraphFormat::kEdgeList);
}

std::string graph_to_json(const Graph& g, bool include_features) {
  const std::size_t n = g.num_nodes();
  json j;
  j["n"] = n;
  json edges = json::array();
  const auto a = g.adjacency.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i; k < n; ++k)
      if (a[i * n + k] > 0.0) edges.push_back({i, k, a[i * n + k]});
  j["edges"] = std::move(edges);
  if (include_features) {
    const std::size_t d = g.feature_dim();
    json rows = json::array();
    const auto f = g.node_features.data();
    for (std::size_t i = 0; i < n; ++i) {
      json row = json::array();
      for (std::size_t c = 0; c < d; ++c) row.push_back(f[i * d + c]);
      rows.push_back(std::move(row));
    }
    j["node_features"] = std::move(rows);
  }
  return j.dump();
}

void save_graph_json(const std::filesystem::path& path, const Graph& g, bool include_features) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << graph_to_json(g, include_features) << '\n';
}

Graph induced_subgraph(const Graph& g, const std::vector<std::size_t>& nodes) {
  const std::size_t n = g.num_nodes();
  std::vector<bool> seen(n, false);
  for (std::size_t v : nodes) {
    if (v >= n) throw DomainError("node " + std::to_string(v) + " out of range");
    if (seen[v]) throw DomainError("duplicate node " + std::to_string(v));
    seen[v] = true;
  }
  const std::size_t m = nodes.size();
  const auto a = g.adjacency.data();
  Tensor sub = Tensor::zeros({m, m});
  auto s = sub.mutable_data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) s[i * m + j] = a[nodes[i] * n + nodes[j]];

  const std::size_t de = g.edge_feature_dim();
  Tensor ef = Tensor::zeros({m, m, de});
  if (de > 0) {
    auto e = ef.mutable_data();
    const auto src = g.edge_features.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c < de; ++c)
          e[(i * m + j) * de + c] = src[(nodes[i] * n + nodes[j]) * de + c];
  }
  Graph out;
  out.adjacency = std::move(sub);
  out.node_features = gather_rows(g.node_features, nodes);
  out.edge_features = std::move(ef);
  return out;
}

Tensor coarsen_adjacency(const Tensor& adjacency, const ClusterAssignment& pi) {
  const std::size_t n = adjacency.size(0);
  if (pi.num_nodes() != n) throw DimensionError("assignment does not cover every node");
  const std::size_t k = pi.num_clusters();
  const auto a = adjacency.data();
  Tensor out = Tensor::zeros({k, k});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) o[pi[i] * k + pi[j]] += a[i * n + j];
  for (std::size_t c = 0; c < k; ++c) o[c * k + c] *= 0.5;
  return out;
}

Graph coarsen(const Graph& g, const ClusterAssignment& pi) {
  Graph out;
  out.adjacency = coarsen_adjacency(g.adjacency, pi);
  const std::size_t k = pi.num_clusters();
  out.node_features = Tensor::zeros({k, 0});
  out.edge_features = empty_edge_features(k);
  return out;
}

Graph coarsen(const Graph& g, const Tensor& pi_matrix) {
  return coarsen(g, ClusterAssignment::from_matrix(pi_matrix));
}

Graph permute_graph(const Graph& g, const std::vector<std::size_t>& sigma) {
  Graph out;
  out.adjacency = permute_node_axes(g.adjacency, sigma, 2);
  out.node_features = permute_node_axes(g.node_features, sigma, 1);
  out.edge_features = permute_node_axes(g.edge_features, sigma, 2);
  return out;
}

std::vector<std::size_t> community_labels(std::size_t n) {
  std::vector<std::size_t> labels(n);
  const std::size_t first = (n + 1) / 2;
  for (std::size_t i = 0; i < n; ++i) labels[i] = i < first ? 0 : 1;
  return labels;
}

std::vector<Graph> synth_community(const CommunityOptions& o, std::uint64_t seed) {
  if (o.n_max < o.n_min) throw DomainError("n_max < n_min");
  if (o.n_min < 2) throw DomainError("n_min must be at least 2");
  if (!(o.p_out >= 0.0 && o.p_out <= o.p_in && o.p_in <= 1.0)) {
    throw DomainError("need 0 <= p_out <= p_in <= 1");
  }
  Rng root(seed);
  std::vector<Graph> graphs;
  graphs.reserve(o.count);
  for (std::size_t g = 0; g < o.count; ++g) {
    Rng rng = root.split(g);
    const std::size_t n = o.n_min + rng.index(o.n_max - o.n_min + 1);
    const auto labels = community_labels(n);
    std::vector<WeightedEdge> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double p = labels[i] == labels[j] ? o.p_in : o.p_out;
        if (rng.bernoulli(p)) edges.push_back({i, j, 1.0});
      }
    graphs.push_back(make_graph(n, edges));
  }
  return graphs;
}

EdgeSplit mask_edges(const Graph& g, double val_frac, double test_frac, std::uint64_t seed) {
  auto edges = g.edges();
  const std::size_t m = edges.size();
  if (m < 20) throw DomainError("mask_edges needs at least 20 edges, graph has " + std::to_string(m));
  const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(m) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(m) + 1e-9));
  if (n_val < 1 || n_test < 1) throw DomainError("graph too small for the requested edge fractions");

  Rng rng(seed);
  // Fisher-Yates with the seeded stream.
  for (std::size_t i = m; i-- > 1;) std::swap(edges[i], edges[rng.index(i + 1)]);

  EdgeSplit split;
  split.val_pos.assign(edges.begin(), edges.begin() + n_val);
  split.test_pos.assign(edges.begin() + n_val, edges.begin() + n_val + n_test);
  split.train_pos.assign(edges.begin() + n_val + n_test, edges.end());

  const std::size_t n = g.num_nodes();
  std::set<NodePair> taken;
  auto sample_non_edges = [&](std::size_t needed, bool exact) {
    std::vector<NodePair> out;
    const std::size_t cap = 100 * needed;
    for (std::size_t attempt = 0; attempt < cap && out.size() < needed; ++attempt) {
      std::size_t u = rng.index(n), v = rng.index(n);
      if (u == v) continue;
      if (u > v) std::swap(u, v);
      if (g.weight(u, v) > 0.0 || taken.count({u, v})) continue;
      taken.insert({u, v});
      out.emplace_back(u, v);
    }
    if (out.size() < needed) {
      // Dense graph: fall back to drawing from the explicit candidate list.
      std::vector<NodePair> pool;
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = u + 1; v < n; ++v)
          if (g.weight(u, v) == 0.0 && !taken.count({u, v})) pool.emplace_back(u, v);
      if (!exact) needed = std::min(needed, out.size() + pool.size());
      const std::size_t missing = needed - out.size();
      if (pool.size() < missing) throw DomainError("not enough non-edges to balance the split");
      for (std::size_t i = 0; i < missing; ++i) {
        std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
        taken.insert(pool[i]);
        out.push_back(pool[i]);
      }
    }
    return out;
  };
  split.val_neg = sample_non_edges(n_val, true);
  split.test_neg = sample_non_edges(n_test, true);
  split.train_neg = sample_non_edges(split.train_pos.size(), false);

  Tensor a = g.adjacency.detach();
  auto d = a.mutable_data();
  for (const auto* held : {&split.val_pos, &split.test_pos})
    for (auto [u, v] : *held) d[u * n + v] = d[v * n + u] = 0.0;
  split.train_graph.adjacency = std::move(a);
  split.train_graph.node_features = g.node_features.detach();
  split.train_graph.edge_features = g.edge_features.detach();
  return split;
}

}  // namespace mgvae
