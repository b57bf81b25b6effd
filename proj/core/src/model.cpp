#include "mgvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mgvae/error.hpp"
#include "mgvae/ops.hpp"

namespace mgvae {

using nlohmann::json;

namespace {

std::string lvl(std::size_t l) { return "l" + std::to_string(l); }

Tensor select_columns(const Tensor& m, const std::vector<std::size_t>& cols) {
  return transpose(gather_rows(transpose(m), cols));
}

Tensor binarize(const Tensor& a, bool zero_diagonal) {
  const std::size_t n = a.size(0);
  Tensor out = Tensor::zeros({n, n});
  auto o = out.mutable_data();
  const auto d = a.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) o[i * n + j] = (d[i * n + j] > 0.0 && !(zero_diagonal && i == j)) ? 1.0 : 0.0;
  return out;
}

void require_finite(double v, std::size_t level, const char* term) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite " + std::string(term) + " term at level " + std::to_string(level));
  }
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kRelu: return "relu";
  }
  return "sigmoid";
}

Activation activation_from(const std::string& s) {
  if (s == "identity") return Activation::kIdentity;
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "relu") return Activation::kRelu;
  throw FormatError("unknown activation '" + s + "'");
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw DomainError("model config: " + what); };
  if (levels < 2) fail("levels must be at least 2");
  if (clusters.size() != levels) fail("clusters must list one K per level");
  if (clusters.front() != 1) fail("K at level 1 must be 1");
  for (std::size_t k : clusters)
    if (k < 1) fail("every K must be at least 1");
  if (order.size() != levels) fail("order must list one value per level");
  for (int o : order)
    if (o != 1 && o != 2) fail("order must be 1 or 2");
  if (lambda.size() != levels) fail("lambda must list one weight per level");
  for (double l : lambda)
    if (!(l >= 0.0)) fail("lambda must be non-negative");
  if (depth < 1 || hidden < 1 || latent_dim < 1 || cluster_depth < 1 || cluster_hidden < 1) {
    fail("depth, widths and latent_dim must be positive");
  }
  if (input_dim < 1 && edge_dim < 1) fail("input graphs need node or edge features");
  if (max_nodes < 1) fail("max_nodes must be positive");
  if (!(jitter >= 0.0)) fail("jitter must be non-negative");
}

std::size_t ModelConfig::prior_support_at(std::size_t level) const {
  if (level == levels) return prior_support ? prior_support : max_nodes;
  return clusters_at(level + 1);
}

std::string config_to_json(const ModelConfig& c) {
  json j;
  j["levels"] = c.levels;
  j["clusters"] = c.clusters;
  j["order"] = c.order;
  j["depth"] = c.depth;
  j["hidden"] = c.hidden;
  j["latent_dim"] = c.latent_dim;
  j["input_dim"] = c.input_dim;
  j["edge_dim"] = c.edge_dim;
  j["cluster_depth"] = c.cluster_depth;
  j["cluster_hidden"] = c.cluster_hidden;
  j["lambda"] = c.lambda;
  j["activation"] = activation_name(c.activation);
  j["prior"] = c.prior == PriorKind::kLearnable ? "learnable" : "standard";
  j["match"] = c.match == MatchMode::kHungarian ? "hungarian" : "free";
  j["prior_support"] = c.prior_support;
  j["max_nodes"] = c.max_nodes;
  j["global_decoder"] = c.global_decoder;
  j["global_hidden"] = c.global_hidden;
  j["feature_recon"] = c.feature_recon;
  j["head_hidden"] = c.head_hidden;
  j["jitter"] = c.jitter;
  return j.dump(2);
}

ModelConfig config_from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.levels = j.at("levels").get<std::size_t>();
    c.clusters = j.at("clusters").get<std::vector<std::size_t>>();
    c.order = j.at("order").get<std::vector<int>>();
    c.depth = j.at("depth").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.edge_dim = j.value("edge_dim", std::size_t{0});
    c.cluster_depth = j.at("cluster_depth").get<std::size_t>();
    c.cluster_hidden = j.at("cluster_hidden").get<std::size_t>();
    c.lambda = j.at("lambda").get<std::vector<double>>();
    c.activation = activation_from(j.value("activation", std::string("sigmoid")));
    const std::string prior = j.value("prior", std::string("standard"));
    if (prior != "standard" && prior != "learnable") throw FormatError("unknown prior '" + prior + "'");
    c.prior = prior == "learnable" ? PriorKind::kLearnable : PriorKind::kStandard;
    const std::string match = j.value("match", std::string("free"));
    if (match != "free" && match != "hungarian") throw FormatError("unknown matcher '" + match + "'");
    c.match = match == "hungarian" ? MatchMode::kHungarian : MatchMode::kFree;
    c.prior_support = j.value("prior_support", std::size_t{0});
    c.max_nodes = j.at("max_nodes").get<std::size_t>();
    c.global_decoder = j.value("global_decoder", false);
    c.global_hidden = j.value("global_hidden", std::size_t{128});
    c.feature_recon = j.value("feature_recon", false);
    c.head_hidden = j.value("head_hidden", std::size_t{0});
    c.jitter = j.value("jitter", kDefaultJitter);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const ModelConfig& c = config_;
  Rng root(seed);
  levels_.resize(c.levels);
  for (std::size_t l = 1; l <= c.levels; ++l) {
    Rng rng = root.split(l);
    LevelParams& p = levels_[l - 1];
    const std::size_t in = l == c.levels ? c.input_dim : c.latent_dim;
    const std::size_t edge = l == c.levels ? c.edge_dim : 0;
    const int order = c.order_at(l);

    std::vector<std::size_t> channels{order == 2 ? in + edge : in};
    channels.insert(channels.end(), c.depth, c.hidden);
    p.encoder.stack = make_layer_params(order, channels, c.activation, c.activation, rng);
    if (order == 1) {
      p.encoder.mu_w = glorot(c.hidden, c.latent_dim, rng);
      p.encoder.aux_w = glorot(c.hidden, c.latent_dim, rng);
    } else {
      p.encoder.mu_w = glorot(2 * c.hidden, c.latent_dim, rng);
      // Factor head starts near the identity: small weights on the hidden
      // channels, unit weight on the appended identity channel.
      Tensor w = glorot(c.hidden + 1, c.latent_dim, rng);
      auto wd = w.mutable_data();
      for (std::size_t i = 0; i < c.hidden; ++i)
        for (std::size_t j = 0; j < c.latent_dim; ++j) wd[i * c.latent_dim + j] *= 0.01;
      for (std::size_t j = 0; j < c.latent_dim; ++j) wd[c.hidden * c.latent_dim + j] = 1.0;
      p.encoder.aux_w = w;
    }
    p.encoder.mu_b = zeros_param({c.latent_dim});
    p.encoder.aux_b = zeros_param({c.latent_dim});

    if (c.clusters_at(l) > 1) {
      std::vector<std::size_t> cch{in};
      cch.insert(cch.end(), c.cluster_depth - 1, c.cluster_hidden);
      cch.push_back(c.clusters_at(l));
      p.clustering = make_layer_params(1, cch, c.activation, Activation::kIdentity, rng);
    }
    if (c.prior == PriorKind::kLearnable) {
      p.prior = make_learnable_prior(c.prior_support_at(l), c.latent_dim, rng);
    }
  }
  Rng rng = root.split(0);
  if (c.global_decoder) {
    const std::size_t m = c.max_nodes;
    global_ = DenseParams{glorot(m * c.latent_dim, c.global_hidden, rng), zeros_param({c.global_hidden}),
                          glorot(c.global_hidden, m * m, rng), zeros_param({m * m})};
  }
  if (c.head_hidden > 0) {
    head_ = DenseParams{glorot(c.levels * c.latent_dim, c.head_hidden, rng), zeros_param({c.head_hidden}),
                        glorot(c.head_hidden, 1, rng), zeros_param({1})};
  }
  if (c.feature_recon) {
    feature_head_ = DenseParams{glorot(c.latent_dim, c.input_dim, rng), zeros_param({c.input_dim}), Tensor(),
                                Tensor()};
  }
}

TensorMap Model::named_parameters() const {
  TensorMap out;
  for (std::size_t l = 1; l <= config_.levels; ++l) {
    const LevelParams& p = levels_[l - 1];
    const std::string enc = "enc." + lvl(l);
    for (std::size_t t = 0; t < p.encoder.stack.depth(); ++t) {
      out[enc + ".t" + std::to_string(t) + ".W"] = p.encoder.stack.weights[t];
      out[enc + ".t" + std::to_string(t) + ".b"] = p.encoder.stack.biases[t];
    }
    out[enc + ".mu.W"] = p.encoder.mu_w;
    out[enc + ".mu.b"] = p.encoder.mu_b;
    const std::string aux = config_.order_at(l) == 1 ? ".sigma" : ".L";
    out[enc + aux + ".W"] = p.encoder.aux_w;
    out[enc + aux + ".b"] = p.encoder.aux_b;
    if (p.clustering) {
      for (std::size_t t = 0; t < p.clustering->depth(); ++t) {
        out["clu." + lvl(l) + ".t" + std::to_string(t) + ".W"] = p.clustering->weights[t];
        out["clu." + lvl(l) + ".t" + std::to_string(t) + ".b"] = p.clustering->biases[t];
      }
    }
    if (p.prior) {
      out["prior." + lvl(l) + ".mu_hat"] = p.prior->mu_hat;
      out["prior." + lvl(l) + ".L_hat"] = p.prior->L_hat;
    }
  }
  auto dense = [&out](const std::string& prefix, const std::optional<DenseParams>& d, bool two) {
    if (!d) return;
    out[prefix + (two ? ".t0.W" : ".W")] = d->w0;
    out[prefix + (two ? ".t0.b" : ".b")] = d->b0;
    if (two) {
      out[prefix + ".t1.W"] = d->w1;
      out[prefix + ".t1.b"] = d->b1;
    }
  };
  dense("dec.global", global_, true);
  dense("head", head_, true);
  dense("feat", feature_head_, false);
  return out;
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void Model::load_parameters(const TensorMap& tensors) {
  for (auto& [name, param] : named_parameters()) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second.shape() != param.shape()) {
      throw FormatError("tensor '" + name + "' has shape " + shape_str(it->second.shape()) + ", model expects " +
                        shape_str(param.shape()));
    }
    Tensor dst = param;
    std::copy(it->second.data().begin(), it->second.data().end(), dst.mutable_data().begin());
  }
}

void Model::set_data_statistics(const std::vector<Graph>& graphs) {
  node_counts_.clear();
  edge_counts_.clear();
  for (const Graph& g : graphs) {
    node_counts_.push_back(g.num_nodes());
    edge_counts_.push_back(g.num_edges());
  }
}

void Model::set_counts(std::vector<std::size_t> nodes, std::vector<std::size_t> edges) {
  if (nodes.size() != edges.size()) throw FormatError("node and edge count lists differ in length");
  node_counts_ = std::move(nodes);
  edge_counts_ = std::move(edges);
}

// ---------------------------------------------------------------------------
// Encoding

GaussianState encode_local(const Graph& g, const EncoderParams& params, int order) {
  if (order == 1) {
    const Tensor h = apply_stack(g.adjacency, g.node_features, params.stack);
    const Tensor mu = linear(h, params.mu_w, params.mu_b);
    const Tensor sigma = exp(linear(h, params.aux_w, params.aux_b));
    return {mu, diag_embed(sigma), true};
  }
  const Tensor h0 = promote_features(g.node_features, g.edge_features);
  const Tensor h = apply_stack(g.adjacency, h0, params.stack);
  const Tensor mu = contract_to_first_order(h, params.mu_w, params.mu_b);
  const Tensor factor = linear(append_identity_channel(h), params.aux_w, params.aux_b);
  return {mu, factor, false};
}

Hierarchy encode_hierarchy(const Graph& input, const Model& model, const EncodeOptions& options) {
  const ModelConfig& cfg = model.config();
  if (input.num_nodes() == 0) throw DimensionError("encode_hierarchy: empty graph");
  if (input.feature_dim() != cfg.input_dim) {
    throw DimensionError("encode_hierarchy: graph has " + std::to_string(input.feature_dim()) +
                         " node features, model expects " + std::to_string(cfg.input_dim));
  }
  if (cfg.order_at(cfg.levels) == 2 && input.edge_feature_dim() != cfg.edge_dim) {
    throw DimensionError("encode_hierarchy: edge feature width does not match the model");
  }
  if (options.frozen && options.frozen->size() != cfg.levels) {
    throw DimensionError("encode_hierarchy: frozen assignments must cover every level");
  }
  const bool train = options.mode == EncodeMode::kTrain;
  const std::size_t dz = cfg.latent_dim;
  Rng root(options.seed);
  Hierarchy h;
  h.levels.resize(cfg.levels);
  Graph g = input;
  for (std::size_t l = cfg.levels; l >= 1; --l) {
    Rng rng = root.split(l);
    const LevelParams& params = model.level(l);
    LevelState& st = h.levels[l - 1];
    st.level = l;
    const std::size_t n = g.num_nodes();
    st.requested_clusters = cfg.clusters_at(l);
    std::size_t k = std::min(st.requested_clusters, n);
    if (k < st.requested_clusters) {
      h.warnings.push_back("level " + std::to_string(l) + ": K=" + std::to_string(st.requested_clusters) +
                           " exceeds " + std::to_string(n) + " nodes, clamped");
    }

    ClusterAssignment pi;
    if (options.frozen) {
      pi = (*options.frozen)[l - 1];
      if (pi.num_nodes() != n) {
        throw DimensionError("frozen assignment at level " + std::to_string(l) + " covers " +
                             std::to_string(pi.num_nodes()) + " nodes, graph has " + std::to_string(n));
      }
      st.assignment_matrix = pi.matrix();
    } else if (k == 1) {
      pi = ClusterAssignment(std::vector<std::size_t>(n, 0), 1);
      st.assignment_matrix = pi.matrix();
    } else {
      Tensor logits = cluster_logits(g, *params.clustering);
      if (k < logits.size(1)) logits = top_left(logits, n, k);
      if (train) {
        Rng crng = rng.split(0);
        GumbelSample s = gumbel_assign(logits, crng);
        pi = s.assignment;
        st.assignment_matrix = s.relaxed;
      } else {
        pi = argmax_assign(logits);
        st.assignment_matrix = pi.matrix();
      }
    }
    st.balance = balance_kl(st.assignment_matrix);

    // Drop empty clusters.
    std::vector<std::size_t> used;
    const auto sizes = pi.sizes();
    for (std::size_t c = 0; c < sizes.size(); ++c)
      if (sizes[c] > 0) used.push_back(c);
    st.assignment = pi.compacted();
    const Tensor matrix = used.size() == pi.num_clusters() ? st.assignment_matrix
                                                           : select_columns(st.assignment_matrix, used);
    st.members = st.assignment.members();

    std::vector<Tensor> z_parts, mu_parts;
    std::vector<std::size_t> position(n);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < st.members.size(); ++c) {
      const auto& mem = st.members[c];
      const Graph sub = induced_subgraph(g, mem);
      GaussianState post = encode_local(sub, params.encoder, cfg.order_at(l));
      Tensor z = post.mu;
      if (train) {
        Rng erng = rng.split(1 + c);
        z = sample(post, standard_normal(mem.size(), dz, erng));
      }
      z_parts.push_back(z);
      mu_parts.push_back(post.mu);
      st.posteriors.push_back(std::move(post));
      for (std::size_t v : mem) position[v] = offset++;
    }
    st.z = gather_rows(concat_rows(z_parts), position);
    st.mu = gather_rows(concat_rows(mu_parts), position);

    // Mean-pool each cluster into a node of the coarser graph.
    const std::size_t kc = st.members.size();
    std::vector<double> inv(kc * dz);
    for (std::size_t c = 0; c < kc; ++c)
      std::fill_n(inv.begin() + static_cast<std::ptrdiff_t>(c * dz), dz, 1.0 / static_cast<double>(st.members[c].size()));
    const Tensor pooled = mul(matmul(transpose(matrix), st.z), Tensor({kc, dz}, std::move(inv)));

    st.graph = g;
    Graph next;
    next.adjacency = coarsen_adjacency(g.adjacency, st.assignment);
    next.node_features = pooled;
    next.edge_features = Tensor::zeros({kc, kc, 0});
    g = std::move(next);
    if (l == 1) h.apex = pooled;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Decoding

Tensor decode_local_logits(const Tensor& z) {
  if (z.dim() != 2 || z.size(0) == 0) throw DimensionError("decode_local expects (n, d) latents with n >= 1");
  return matmul(z, transpose(z));
}

Tensor decode_local(const Tensor& z) { return sigmoid(decode_local_logits(z)); }

Tensor decode_global_logits(const Tensor& z_padded, const DenseParams& p) {
  const std::size_t in = p.w0.size(0);
  const std::size_t m2 = p.w1.size(1);
  const auto m = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m2))));
  if (z_padded.dim() != 2 || z_padded.numel() != in || z_padded.size(0) != m) {
    throw DimensionError("decode_global: latents " + shape_str(z_padded.shape()) + " exceed or mismatch the " +
                         std::to_string(m) + "-node decoder");
  }
  const Tensor flat = reshape(z_padded, {1, in});
  const Tensor hidden = sigmoid(linear(flat, p.w0, p.b0));
  const Tensor out = linear(hidden, p.w1, p.b1);
  return symmetrize(reshape(out, {m, m}));
}

Tensor decode_global(const Tensor& z_padded, const DenseParams& params) {
  return sigmoid(decode_global_logits(z_padded, params));
}

// ---------------------------------------------------------------------------
// Losses

LossTerms elbo_terms(const Hierarchy& h, const Model& model) {
  const ModelConfig& cfg = model.config();
  if (h.levels.size() != cfg.levels) throw DimensionError("hierarchy depth does not match the model");
  std::vector<Tensor> terms;
  LossTerms out;
  for (std::size_t l = cfg.levels; l >= 1; --l) {
    const LevelState& st = h.at(l);
    const bool bottom = l == cfg.levels;
    const std::size_t n = st.graph.num_nodes();
    std::vector<Tensor> recon, kl;
    if (bottom && cfg.global_decoder) {
      const std::size_t m = cfg.max_nodes;
      if (n > m) throw DimensionError("graph with " + std::to_string(n) + " nodes exceeds max_nodes");
      const Tensor logits = decode_global_logits(pad_rows(st.z, m), *model.global_decoder());
      Tensor target = Tensor::zeros({m, m});
      Tensor mask = Tensor::zeros({m, m});
      const Tensor a = binarize(st.graph.adjacency, true);
      auto td = target.mutable_data();
      auto md = mask.mutable_data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          td[i * m + j] = a.data()[i * n + j];
          md[i * m + j] = 1.0;
        }
      recon.push_back(bce_with_logits(logits, target, mask));
    } else {
      for (const auto& mem : st.members) {
        const Tensor zk = gather_rows(st.z, mem);
        const Graph sub = induced_subgraph(st.graph, mem);
        recon.push_back(bce_with_logits(decode_local_logits(zk), binarize(sub.adjacency, bottom)));
      }
    }
    if (bottom && model.feature_head()) {
      const auto& fh = *model.feature_head();
      const Tensor diff = sub(linear(st.z, fh.w0, fh.b0), st.graph.node_features.detach());
      recon.push_back(sum(square(diff)));
    }
    for (const GaussianState& post : st.posteriors) {
      if (cfg.prior == PriorKind::kLearnable) {
        kl.push_back(matched_kl(post, *model.level(l).prior, cfg.match, cfg.jitter));
      } else {
        kl.push_back(gaussian_kl(post, standard_prior(post.num_nodes(), cfg.latent_dim), cfg.jitter));
      }
    }
    double r = 0.0, k = 0.0;
    for (const Tensor& t : recon) r += t.item();
    for (const Tensor& t : kl) k += t.item();
    require_finite(r, l, "reconstruction");
    require_finite(k, l, "KL");
    out.recon += r;
    out.kl += k;
    terms.insert(terms.end(), recon.begin(), recon.end());
    terms.insert(terms.end(), kl.begin(), kl.end());
  }
  Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  out.total = total;
  return out;
}

Tensor elbo_loss(const Hierarchy& h, const Model& model) { return elbo_terms(h, model).total; }

namespace {

Tensor balance_penalty(const Hierarchy& h, const ModelConfig& cfg, double& value) {
  Tensor total = Tensor::scalar(0.0);
  value = 0.0;
  for (std::size_t l = cfg.levels; l >= 1; --l) {
    const double lambda = cfg.lambda_at(l);
    if (lambda == 0.0) continue;
    const Tensor& b = h.at(l).balance;
    require_finite(b.item(), l, "balance");
    value += lambda * b.item();
    total = add(total, scale(b, lambda));
  }
  return total;
}

}  // namespace

LossTerms total_loss_terms(const Hierarchy& h, const Model& model) {
  LossTerms t = elbo_terms(h, model);
  double bal = 0.0;
  const Tensor pen = balance_penalty(h, model.config(), bal);
  t.balance = bal;
  if (bal != 0.0 || pen.requires_grad()) t.total = add(t.total, pen);
  return t;
}

Tensor total_loss(const Hierarchy& h, const Model& model) { return total_loss_terms(h, model).total; }

Tensor predict(const Hierarchy& h, const Model& model) {
  if (!model.head()) throw DomainError("model has no regression head (head_hidden = 0)");
  const ModelConfig& cfg = model.config();
  std::vector<Tensor> readouts;
  for (std::size_t l = cfg.levels; l >= 1; --l) readouts.push_back(readout_invariant(h.at(l).mu));
  const Tensor x = reshape(concat_last(readouts), {1, cfg.levels * cfg.latent_dim});
  const DenseParams& p = *model.head();
  return reshape(linear(sigmoid(linear(x, p.w0, p.b0)), p.w1, p.b1), {});
}

Tensor mgn_supervised_loss(const Hierarchy& h, double target, const Model& model) {
  const Tensor err = square(add_scalar(predict(h, model), -target));
  double bal = 0.0;
  const Tensor pen = balance_penalty(h, model.config(), bal);
  return add(err, pen);
}

// ---------------------------------------------------------------------------
// Generation

std::vector<Graph> generate(const Model& model, const GenerateOptions& options) {
  const ModelConfig& cfg = model.config();
  if (!(options.threshold >= 0.0 && options.threshold <= 1.0)) {
    throw DomainError("generation threshold must lie in [0, 1]");
  }
  if (options.nodes == 0 && model.node_counts().empty()) {
    throw DomainError("generate: no node count given and the model carries no training statistics");
  }
  NoGradGuard no_grad;
  const std::size_t dz = cfg.latent_dim;
  const LevelParams& bottom = model.level(cfg.levels);
  Rng root(options.seed);
  std::vector<Graph> out;
  out.reserve(options.count);
  for (std::size_t s = 0; s < options.count; ++s) {
    Rng rng = root.split(options.first + s);
    const std::size_t n =
        options.nodes ? options.nodes : model.node_counts()[rng.index(model.node_counts().size())];
    if (cfg.global_decoder && n > cfg.max_nodes) {
      throw DimensionError("generate: " + std::to_string(n) + " nodes exceed the decoder capacity " +
                           std::to_string(cfg.max_nodes));
    }
    Tensor z;
    if (cfg.prior == PriorKind::kLearnable) {
      const LearnablePrior& prior = *bottom.prior;
      const std::size_t m = prior.support();
      if (n > m) {
        throw DimensionError("generate: " + std::to_string(n) + " nodes exceed the prior support " +
                             std::to_string(m));
      }
      z = top_left(sample(prior.state(), standard_normal(m, dz, rng)), n, dz);
    } else {
      z = standard_normal(n, dz, rng);
    }
    Tensor probs = cfg.global_decoder
                       ? top_left(decode_global(pad_rows(z, cfg.max_nodes), *model.global_decoder()), n, n)
                       : decode_local(z);
    const auto p = probs.data();
    std::vector<WeightedEdge> edges;
    if (options.mode == GenerateMode::kThreshold) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
          if (p[i * n + j] > options.threshold) edges.push_back({i, j, 1.0});
    } else {
      std::vector<std::size_t> pool;
      for (std::size_t g = 0; g < model.node_counts().size(); ++g)
        if (model.node_counts()[g] == n) pool.push_back(model.edge_counts()[g]);
      if (pool.empty()) pool = model.edge_counts();
      std::size_t target = pool.empty() ? 0 : pool[rng.index(pool.size())];
      std::vector<NodePair> pairs;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
      std::stable_sort(pairs.begin(), pairs.end(), [&](const NodePair& a, const NodePair& b) {
        return p[a.first * n + a.second] > p[b.first * n + b.second];
      });
      target = std::min(target, pairs.size());
      for (std::size_t e = 0; e < target; ++e) edges.push_back({pairs[e].first, pairs[e].second, 1.0});
    }
    out.push_back(make_graph(n, edges));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::filesystem::path config_sidecar(const std::filesystem::path& checkpoint) {
  std::filesystem::path p = checkpoint;
  return p.replace_extension(".json");
}

void save_model(const std::filesystem::path& path, const Model& model) {
  TensorMap tensors = model.named_parameters();
  auto counts = [](const std::vector<std::size_t>& v) {
    std::vector<double> d(v.begin(), v.end());
    return Tensor({v.size()}, std::move(d));
  };
  tensors["data.node_counts"] = counts(model.node_counts());
  tensors["data.edge_counts"] = counts(model.edge_counts());
  save_checkpoint(path, tensors);
  std::ofstream cfg(config_sidecar(path), std::ios::trunc);
  if (!cfg) throw IoError("cannot write " + config_sidecar(path).string());
  cfg << config_to_json(model.config()) << '\n';
}

Model load_model(const std::filesystem::path& path) {
  const TensorMap tensors = load_checkpoint(path);
  const auto sidecar = config_sidecar(path);
  std::ifstream in(sidecar);
  if (!in) throw IoError("cannot open model config " + sidecar.string());
  std::stringstream ss;
  ss << in.rdbuf();
  Model model(config_from_json(ss.str()), 0);
  model.load_parameters(tensors);
  auto counts = [&tensors](const std::string& name) {
    std::vector<std::size_t> v;
    const auto it = tensors.find(name);
    if (it == tensors.end()) return v;
    for (double x : it->second.data()) {
      if (!(x >= 0.0) || x != std::floor(x)) throw FormatError("tensor '" + name + "' is not a count vector");
      v.push_back(static_cast<std::size_t>(x));
    }
    return v;
  };
  model.set_counts(counts("data.node_counts"), counts("data.edge_counts"));
  return model;
}

}  // namespace mgvae
