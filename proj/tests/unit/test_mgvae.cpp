#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "mgvae/error.hpp"
#include "mgvae/grad_check.hpp"
#include "mgvae/model.hpp"
#include "mgvae/trainer.hpp"
#include "oracles.hpp"

using namespace mgvae;

namespace {

Graph path_graph(std::size_t n) {
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return make_graph(n, edges);
}

ModelConfig small_config() {
  ModelConfig c;
  c.levels = 2;
  c.clusters = {1, 2};
  c.order = {1, 1};
  c.lambda = {1.0, 1.0};
  c.depth = 2;
  c.hidden = 6;
  c.latent_dim = 3;
  c.cluster_hidden = 6;
  c.max_nodes = 8;
  return c;
}

EncodeOptions eval_mode() {
  EncodeOptions o;
  o.mode = EncodeMode::kEval;
  return o;
}

void zero_all(Model& model) {
  for (Tensor t : model.parameters()) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
}

}  // namespace

TEST(ModelConfig, Validation) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.clusters = {2, 2};
  EXPECT_THROW(c.validate(), DomainError);
  c = small_config();
  c.levels = 1;
  c.clusters = {1};
  c.order = {1};
  c.lambda = {1};
  EXPECT_THROW(c.validate(), DomainError);
  c = small_config();
  c.order = {1, 3};
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = small_config();
  c.prior = PriorKind::kLearnable;
  c.match = MatchMode::kHungarian;
  c.activation = Activation::kRelu;
  c.order = {2, 1};
  c.lambda = {0.5, 0.25};
  const ModelConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
  EXPECT_THROW(config_from_json("{\"levels\": \"x\"}"), FormatError);
}

TEST(EncodeHierarchy, StructureOnPath) {
  const Model model(small_config(), 0);
  const Hierarchy h = encode_hierarchy(path_graph(4), model, eval_mode());
  ASSERT_EQ(h.depth(), 2u);
  EXPECT_EQ(h.at(2).graph.num_nodes(), 4u);
  EXPECT_EQ(h.at(2).z.shape(), (Shape{4, 3}));
  EXPECT_LE(h.at(2).assignment.num_clusters(), 2u);
  EXPECT_EQ(h.at(1).graph.num_nodes(), h.at(2).assignment.num_clusters());
  EXPECT_EQ(h.at(1).assignment.num_clusters(), 1u);
  EXPECT_EQ(h.apex.shape(), (Shape{1, 3}));
  EXPECT_TRUE(h.warnings.empty());
}

TEST(EncodeHierarchy, FrozenTwoClusterBottom) {
  const Model model(small_config(), 0);
  const std::vector<ClusterAssignment> frozen{ClusterAssignment({0, 0}, 1), ClusterAssignment({0, 0, 1, 1}, 2)};
  EncodeOptions o = eval_mode();
  o.frozen = &frozen;
  const Hierarchy h = encode_hierarchy(path_graph(4), model, o);
  EXPECT_EQ(h.at(2).assignment.num_clusters(), 2u);
  EXPECT_EQ(max_abs_diff(h.at(1).graph.adjacency, Tensor::matrix({{1, 1}, {1, 1}})), 0.0);
  EXPECT_EQ(h.at(2).posteriors.size(), 2u);
}

TEST(EncodeHierarchy, ClampsKToNodeCount) {
  ModelConfig c = small_config();
  c.clusters = {1, 5};
  const Model model(c, 0);
  const Hierarchy h = encode_hierarchy(path_graph(3), model, eval_mode());
  EXPECT_EQ(h.warnings.size(), 1u);
  EXPECT_LE(h.at(2).assignment.num_clusters(), 3u);
}

TEST(EncodeHierarchy, EvalModeIsDeterministic) {
  const Model model(small_config(), 3);
  Rng rng(1);
  const Graph g = oracle::random_graph(7, 0.4, rng);
  const Hierarchy a = encode_hierarchy(g, model, eval_mode());
  const Hierarchy b = encode_hierarchy(g, model, eval_mode());
  EXPECT_EQ(a.at(2).assignment, b.at(2).assignment);
  EXPECT_EQ(max_abs_diff(a.at(2).z, b.at(2).z), 0.0);
  EXPECT_EQ(max_abs_diff(a.apex, b.apex), 0.0);
}

TEST(EncodeHierarchy, TrainModeDependsOnSeedOnly) {
  const Model model(small_config(), 3);
  Rng rng(2);
  const Graph g = oracle::random_graph(7, 0.4, rng);
  EncodeOptions o;
  o.seed = 11;
  EXPECT_EQ(max_abs_diff(encode_hierarchy(g, model, o).at(2).z, encode_hierarchy(g, model, o).at(2).z), 0.0);
}

TEST(EncodeHierarchy, PermutationEquivariantInEvalMode) {
  Rng rng(4);
  for (int order : {1, 2}) {
    ModelConfig c = small_config();
    c.order = {1, order};
    const Model model(c, 5);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng.index(5);
      const Graph g = oracle::random_graph(n, 0.5, rng);
      const auto sigma = oracle::random_permutation(n, rng);
      const Hierarchy h = encode_hierarchy(g, model, eval_mode());
      const Hierarchy hp = encode_hierarchy(permute_graph(g, sigma), model, eval_mode());
      EXPECT_LT(max_abs_diff(hp.at(2).z, permute_node_axes(h.at(2).z, sigma, 1)), 1e-9);
      EXPECT_LT(max_abs_diff(decode_local(hp.at(2).z), permute_node_axes(decode_local(h.at(2).z), sigma, 2)), 1e-9);
      EXPECT_LT(max_abs_diff(hp.apex, h.apex), 1e-9);
    }
  }
}

TEST(EncodeHierarchy, CoarseningChainShrinks) {
  ModelConfig c = small_config();
  c.levels = 3;
  c.clusters = {1, 2, 4};
  c.order = {1, 1, 1};
  c.lambda = {1, 1, 1};
  const Model model(c, 2);
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Hierarchy h = encode_hierarchy(oracle::random_graph(10, 0.4, rng), model, eval_mode());
    for (std::size_t l = 3; l >= 2; --l) {
      if (c.clusters_at(l) < h.at(l).graph.num_nodes()) {
        EXPECT_LT(h.at(l - 1).graph.num_nodes(), h.at(l).graph.num_nodes());
      }
      EXPECT_EQ(h.at(l - 1).graph.num_nodes(), h.at(l).assignment.num_clusters());
    }
  }
}

TEST(EncodeHierarchy, LocalWorkloadBound) {
  const Model model(small_config(), 1);
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Hierarchy h = encode_hierarchy(oracle::random_graph(8, 0.4, rng), model, eval_mode());
    std::size_t work = 0;
    for (const auto& mem : h.at(2).members) work += mem.size() * mem.size();
    EXPECT_LE(work, 64u);
    if (h.at(2).members.size() > 1) EXPECT_LT(work, 64u);
  }
  // Equal clusters: Σ (n/K)² = n²/K.
  for (std::size_t k : {1u, 2u, 4u}) EXPECT_EQ(k * (8 / k) * (8 / k), 64u / k);
}

TEST(EncodeHierarchy, RejectsBadInput) {
  const Model model(small_config(), 0);
  EXPECT_THROW(encode_hierarchy(make_graph(3, {}, Tensor::zeros({3, 2})), model, eval_mode()), DimensionError);
}

TEST(DecodeLocal, Examples) {
  EXPECT_DOUBLE_EQ(decode_local(Tensor::matrix({{1, 0}, {0, 1}})).at({0, 1}), 0.5);
  EXPECT_NEAR(decode_local(Tensor::matrix({{1, 0}, {1, 0}})).at({0, 1}), 0.731059, 1e-6);
  EXPECT_THROW(decode_local(Tensor::zeros({0, 2})), DimensionError);
}

TEST(DecodeGlobal, SymmetricBiasOnlyAndDifferentiable) {
  Rng rng(8);
  const std::size_t m = 4, d = 2, hidden = 5;
  DenseParams p{oracle::random_tensor({m * d, hidden}, rng), oracle::random_tensor({hidden}, rng),
                oracle::random_tensor({hidden, m * m}, rng), Tensor::full({m * m}, 0.3)};
  const Tensor z = oracle::random_tensor({m, d}, rng);
  const Tensor a = decode_global(z, p);
  EXPECT_EQ(max_abs_diff(a, transpose(a)), 0.0);

  DenseParams zero{Tensor::zeros({m * d, hidden}), Tensor::zeros({hidden}), Tensor::zeros({hidden, m * m}),
                   Tensor::full({m * m}, 0.3)};
  const Tensor b = decode_global(z, zero);
  for (double v : b.data()) EXPECT_NEAR(v, 1.0 / (1.0 + std::exp(-0.3)), 1e-15);

  EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(decode_global(x, p))); }, z), 1e-4);
  EXPECT_LT(grad_check([&](const Tensor& w) { return sum(square(decode_global(z, {w, p.b0, p.w1, p.b1}))); }, p.w0),
            1e-4);
  EXPECT_THROW(decode_global(oracle::random_tensor({5, d}, rng), p), DimensionError);
}

TEST(ElboLoss, AllHalfPredictions) {
  ModelConfig c = small_config();
  c.clusters = {1, 1};
  Model model(c, 0);
  zero_all(model);
  const std::size_t n = 5;
  const Hierarchy h = encode_hierarchy(path_graph(n), model, eval_mode());
  // Zero weights give zero latents, so every logit is 0. Level 1 holds a
  // single node with one diagonal entry.
  EXPECT_NEAR(elbo_terms(h, model).recon, (n * n + 1) * std::log(2.0), 1e-12);
}

TEST(ElboLoss, PerfectReconstructionFloor) {
  const Tensor a = Tensor::matrix({{0, 1}, {1, 0}});
  const Tensor logits = Tensor::matrix({{-30, 30}, {30, -30}});
  EXPECT_LT(bce_with_logits(logits, a).item() / 4.0, 1e-6);
  GaussianState s{Tensor::zeros({2, 1}), diag_embed(Tensor::full({2, 1}, 1.0)), true};
  EXPECT_NEAR(gaussian_kl(s, standard_prior(2, 1)).item(), 0.0, 1e-12);
}

TEST(ElboLoss, ReconstructionDecreasesTowardTarget) {
  const Tensor a = Tensor::matrix({{0, 1}, {1, 0}});
  double prev = INFINITY;
  for (double t : {0.0, 1.0, 2.0, 4.0, 8.0}) {
    const double v = bce_with_logits(Tensor::matrix({{-t, t}, {t, -t}}), a).item();
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(TotalLoss, LambdaZeroEqualsElbo) {
  ModelConfig c = small_config();
  c.lambda = {0.0, 0.0};
  const Model model(c, 1);
  Rng rng(9);
  EncodeOptions o;
  o.seed = 4;
  const Hierarchy h = encode_hierarchy(oracle::random_graph(8, 0.4, rng), model, o);
  EXPECT_EQ(total_loss(h, model).item(), elbo_loss(h, model).item());
}

TEST(TotalLoss, BalancePenalty) {
  const Model model(small_config(), 1);
  std::vector<ClusterAssignment> frozen{ClusterAssignment({0, 0}, 1), ClusterAssignment({0, 0, 1, 1}, 2)};
  EncodeOptions o = eval_mode();
  o.frozen = &frozen;
  Hierarchy h = encode_hierarchy(path_graph(4), model, o);
  EXPECT_EQ(total_loss(h, model).item(), elbo_loss(h, model).item());

  frozen = {ClusterAssignment({0}, 1), ClusterAssignment({0, 0, 0, 0}, 2)};
  h = encode_hierarchy(path_graph(4), model, o);
  EXPECT_NEAR(total_loss(h, model).item() - elbo_loss(h, model).item(), std::log(2.0), 1e-12);
}

TEST(TotalLoss, ComposedGradCheckWithFrozenAssignments) {
  Rng rng(10);
  for (PriorKind prior : {PriorKind::kStandard, PriorKind::kLearnable}) {
    ModelConfig c = small_config();
    c.prior = prior;
    c.order = {1, 2};
    c.max_nodes = 6;
    Model model(c, 7);
    const Graph g = oracle::random_graph(6, 0.5, rng);
    const std::vector<ClusterAssignment> frozen{ClusterAssignment({0, 0}, 1),
                                                ClusterAssignment({0, 1, 0, 1, 1, 0}, 2)};
    EncodeOptions o;
    o.seed = 3;
    o.frozen = &frozen;
    auto loss = [&] { return total_loss(encode_hierarchy(g, model, o), model); };
    for (auto& [name, param] : model.named_parameters()) {
      Tensor p = param;
      EXPECT_LT(grad_check_param(loss, p), 1e-3) << name;
    }
  }
}

TEST(SupervisedLoss, ZeroHeadAndGradientFlow) {
  ModelConfig c = small_config();
  c.head_hidden = 4;
  Model model(c, 2);
  const std::vector<ClusterAssignment> frozen{ClusterAssignment({0, 0}, 1), ClusterAssignment({0, 0, 1, 1}, 2)};
  EncodeOptions o = eval_mode();
  o.frozen = &frozen;
  const Graph g = path_graph(4);

  Model zero_head = model;
  {
    Tensor w = zero_head.head()->w1;
    std::fill(w.mutable_data().begin(), w.mutable_data().end(), 0.0);
  }
  EXPECT_NEAR(mgn_supervised_loss(encode_hierarchy(g, zero_head, o), 2.0, zero_head).item(), 4.0, 1e-12);

  Model fresh(c, 2);
  const Hierarchy h = encode_hierarchy(g, fresh, o);
  const double y = predict(h, fresh).item();
  EXPECT_NEAR(mgn_supervised_loss(h, y, fresh).item(), 0.0, 1e-15);

  const Hierarchy h2 = encode_hierarchy(g, fresh, o);
  mgn_supervised_loss(h2, y + 1.0, fresh).backward();
  for (std::size_t l : {1u, 2u}) {
    const Tensor& w = fresh.level(l).encoder.stack.weights[0];
    ASSERT_TRUE(w.has_grad()) << "level " << l;
    double norm = 0;
    for (double v : w.grad()) norm += std::abs(v);
    EXPECT_GT(norm, 0.0) << "level " << l;
  }
}

TEST(Train, LossDecreasesOnOneGraph) {
  Model model(small_config(), 0);
  TrainOptions o;
  o.epochs = 50;
  o.lr = 1e-3;
  const auto trace = train(model, {path_graph(6)}, o);
  ASSERT_EQ(trace.size(), 50u);
  EXPECT_LT(trace.back().loss, trace.front().loss);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  Model model(small_config(), 0);
  const TensorMap before = model.named_parameters();
  std::map<std::string, std::vector<double>> copy;
  for (auto& [k, v] : before) copy[k] = {v.data().begin(), v.data().end()};
  TrainOptions o;
  o.epochs = 5;
  o.lr = 0.0;
  const auto trace = train(model, {path_graph(6), path_graph(5)}, o);
  for (auto& [k, v] : model.named_parameters()) {
    EXPECT_EQ(copy[k], std::vector<double>(v.data().begin(), v.data().end())) << k;
  }
  // Each epoch evaluates the same model on freshly drawn noise.
  for (const auto& r : trace) EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Train, SameSeedSameTrace) {
  Rng rng(11);
  std::vector<Graph> data;
  for (int i = 0; i < 4; ++i) data.push_back(oracle::random_graph(6 + i, 0.4, rng));
  TrainOptions o;
  o.epochs = 5;
  o.batch = 2;
  o.seed = 9;
  Model a(small_config(), 1), b(small_config(), 1);
  const auto ta = train(a, data, o);
  const auto tb = train(b, data, o);
  for (std::size_t i = 0; i < ta.size(); ++i) {
    EXPECT_EQ(ta[i].loss, tb[i].loss);
    EXPECT_EQ(ta[i].kl, tb[i].kl);
  }
  for (auto& [k, v] : a.named_parameters()) EXPECT_EQ(max_abs_diff(v, b.named_parameters().at(k)), 0.0) << k;
}

TEST(Train, Errors) {
  Model model(small_config(), 0);
  EXPECT_THROW(train(model, {}, TrainOptions{}), DomainError);
}

TEST(Generate, ThresholdExtremes) {
  Model model(small_config(), 0);
  GenerateOptions o;
  o.count = 5;
  o.nodes = 6;
  o.threshold = 1.0;
  for (const Graph& g : generate(model, o)) EXPECT_EQ(g.num_edges(), 0u);
  o.threshold = 0.0;
  for (const Graph& g : generate(model, o)) EXPECT_EQ(g.num_edges(), 15u);
}

TEST(Generate, DeterministicAndChunkable) {
  ModelConfig c = small_config();
  c.prior = PriorKind::kLearnable;
  c.global_decoder = true;
  c.global_hidden = 8;
  Model model(c, 0);
  model.set_counts({4, 6, 8}, {3, 6, 9});
  GenerateOptions o;
  o.count = 6;
  o.seed = 5;
  o.mode = GenerateMode::kCorrective;
  const auto a = generate(model, o);
  const auto b = generate(model, o);
  GenerateOptions tail = o;
  tail.first = 3;
  tail.count = 3;
  const auto c3 = generate(model, tail);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(graph_to_json(a[i]), graph_to_json(b[i]));
    if (i >= 3) EXPECT_EQ(graph_to_json(a[i]), graph_to_json(c3[i - 3]));
    // Corrective mode hits an edge count seen for the same size.
    const std::size_t n = a[i].num_nodes();
    EXPECT_EQ(a[i].num_edges(), n == 4 ? 3u : n == 6 ? 6u : 9u);
  }
}

TEST(Generate, Errors) {
  Model model(small_config(), 0);
  GenerateOptions o;
  EXPECT_THROW(generate(model, o), DomainError);
  o.nodes = 3;
  o.threshold = 1.5;
  EXPECT_THROW(generate(model, o), DomainError);
}

TEST(Persistence, SaveLoadReproducesForward) {
  ModelConfig c = small_config();
  c.prior = PriorKind::kLearnable;
  c.order = {1, 2};
  Model model(c, 4);
  model.set_counts({5, 6}, {4, 7});
  const auto dir = std::filesystem::temp_directory_path() / "mgvae_model_rt";
  std::filesystem::create_directories(dir);
  save_model(dir / "m.ckpt", model);
  EXPECT_TRUE(std::filesystem::exists(config_sidecar(dir / "m.ckpt")));
  const Model back = load_model(dir / "m.ckpt");
  EXPECT_EQ(back.node_counts(), model.node_counts());
  EXPECT_EQ(back.edge_counts(), model.edge_counts());
  Rng rng(12);
  const Graph g = oracle::random_graph(7, 0.5, rng);
  EncodeOptions o;
  o.seed = 2;
  const Hierarchy h1 = encode_hierarchy(g, model, o);
  const Hierarchy h2 = encode_hierarchy(g, back, o);
  EXPECT_LE(max_abs_diff(h1.at(2).z, h2.at(2).z), 1e-15);
  EXPECT_LE(std::abs(total_loss(h1, model).item() - total_loss(h2, back).item()), 1e-15);
}

TEST(Persistence, MissingTensorIsFormatError) {
  Model model(small_config(), 0);
  TensorMap m = model.named_parameters();
  m.erase(m.begin());
  EXPECT_THROW(model.load_parameters(m), FormatError);
}
