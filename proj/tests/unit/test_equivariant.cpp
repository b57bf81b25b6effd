#include <gtest/gtest.h>

#include "mgvae/equivariant.hpp"
#include "mgvae/error.hpp"
#include "mgvae/grad_check.hpp"
#include "oracles.hpp"

using namespace mgvae;

namespace {

void expect_values(const Tensor& t, const std::vector<double>& expected, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.data()[i], expected[i], tol) << "entry " << i;
}

Tensor perm(const Tensor& x, const std::vector<std::size_t>& sigma, std::size_t axes) {
  return permute_node_axes(x, sigma, axes);
}

}  // namespace

TEST(Mpnn, RawAveragingRule) {
  const Tensor a = Tensor::matrix({{0, 1}, {1, 0}});
  const Tensor h = Tensor::matrix({{1}, {3}});
  const Tensor out = mpnn_layer(a, h, Tensor::matrix({{1}}), std::nullopt, Activation::kIdentity, false);
  expect_values(out, {3, 1});
}

TEST(Mpnn, NoEdgesKeepsFeatures) {
  Rng rng(1);
  const Tensor h = oracle::random_tensor({4, 2}, rng);
  const Tensor out = mpnn_layer(Tensor::zeros({4, 4}), h, Tensor::eye(2), std::nullopt, Activation::kIdentity);
  EXPECT_LT(max_abs_diff(out, h), 1e-15);
}

TEST(Mpnn, IsolatedNodeRowIsZeroWithoutSelfLoops) {
  const Tensor d = normalized_adjacency(Tensor::zeros({2, 2}), false);
  expect_values(d, {0, 0, 0, 0});
}

TEST(Promote, NodeFeaturesOnDiagonal) {
  const Tensor h = promote_features(Tensor::matrix({{1}, {2}}), Tensor::zeros({2, 2, 0}));
  EXPECT_EQ(h.shape(), (Shape{2, 2, 1}));
  expect_values(h, {1, 0, 0, 2});
}

TEST(Promote, EdgeFeaturesOnly) {
  Rng rng(2);
  const Tensor fe = oracle::random_tensor({3, 3, 2}, rng);
  EXPECT_EQ(max_abs_diff(promote_features(Tensor::zeros({3, 0}), fe), fe), 0.0);
}

TEST(SecondOrder, SingleNode) {
  const double a = 1.5, h = -0.7;
  const Tensor w = Tensor({6, 1}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
  const Tensor b = Tensor::vector({0.05});
  const Tensor out = second_order_layer(Tensor::matrix({{a}}), Tensor({1, 1, 1}, {h}), w, b, Activation::kSigmoid);
  const double pre = a * h * (0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.6) + 0.05;
  EXPECT_NEAR(out.item(), 1.0 / (1.0 + std::exp(-pre)), 1e-15);
}

TEST(SecondOrder, ZeroAdjacencyGivesBias) {
  Rng rng(3);
  const Tensor out = second_order_layer(Tensor::zeros({3, 3}), oracle::random_tensor({3, 3, 2}, rng),
                                        oracle::random_tensor({12, 4}, rng), Tensor::vector({0.1, 0.2, 0.3, 0.4}),
                                        Activation::kIdentity);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(out.data()[i * 4 + c], 0.1 * (c + 1), 1e-15);
}

TEST(SecondOrder, MatchesMaterializedContractions) {
  Rng rng(4);
  for (std::size_t n : {1u, 2u, 3u}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor a = oracle::random_symmetric(n, rng);
      const Tensor h = oracle::random_tensor({n, n, 3}, rng);
      EXPECT_LT(max_abs_diff(pair_contractions(a, h), oracle::pair_contractions(a, h)), 1e-12);
    }
  }
}

TEST(ContractToFirstOrder, IdentityInput) {
  const Tensor h = Tensor({2, 2, 1}, {1, 0, 0, 1});
  expect_values(contract_to_first_order(h, Tensor::eye(2), std::nullopt), {1, 1, 1, 1});
}

TEST(ContractToFirstOrder, ZeroInputGivesBias) {
  Rng rng(5);
  const Tensor out = contract_to_first_order(Tensor::zeros({3, 3, 2}), oracle::random_tensor({4, 2}, rng),
                                             Tensor::vector({0.5, -1}));
  expect_values(out, {0.5, -1, 0.5, -1, 0.5, -1});
}

TEST(ContractToFirstOrder, NonSquareThrows) {
  EXPECT_THROW(contract_to_first_order(Tensor::zeros({2, 3, 1}), Tensor::eye(2), std::nullopt), DimensionError);
}

TEST(Readout, Examples) {
  expect_values(readout_invariant(Tensor::matrix({{1, 2}, {3, 4}})), {2, 3});
  expect_values(readout_invariant(Tensor::matrix({{5, 6}})), {5, 6});
  EXPECT_THROW(readout_invariant(Tensor::zeros({0, 2})), DimensionError);
}

TEST(LayerParams, ValidatesShapes) {
  Rng rng(6);
  LayerParams p = make_layer_params(2, {3, 4, 2}, Activation::kRelu, Activation::kIdentity, rng);
  EXPECT_EQ(p.depth(), 2u);
  EXPECT_EQ(p.weights[0].shape(), (Shape{18, 4}));
  EXPECT_NO_THROW(p.validate());
  p.weights[1] = Tensor::zeros({3, 2});
  EXPECT_THROW(p.validate(), DimensionError);
}

TEST(EquivarianceSuite, EveryLayer) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.index(5);
    const auto sigma = oracle::random_permutation(n, rng);
    const Tensor a = oracle::random_graph(n, 0.5, rng).adjacency;
    const Tensor h1 = oracle::random_tensor({n, 3}, rng);
    const Tensor fe = oracle::random_tensor({n, n, 2}, rng);
    const Tensor h2 = promote_features(h1, fe);
    const Tensor w1 = oracle::random_tensor({3, 4}, rng);
    const Tensor w2 = oracle::random_tensor({30, 4}, rng);
    const Tensor wc = oracle::random_tensor({10, 2}, rng);
    const Tensor b = oracle::random_tensor({4}, rng);
    const Tensor pa = perm(a, sigma, 2);

    EXPECT_LT(max_abs_diff(mpnn_layer(pa, perm(h1, sigma, 1), w1, b, Activation::kSigmoid),
                           perm(mpnn_layer(a, h1, w1, b, Activation::kSigmoid), sigma, 1)),
              1e-9);
    EXPECT_LT(max_abs_diff(promote_features(perm(h1, sigma, 1), perm(fe, sigma, 2)), perm(h2, sigma, 2)), 1e-9);
    EXPECT_LT(max_abs_diff(second_order_layer(pa, perm(h2, sigma, 2), w2, b, Activation::kRelu),
                           perm(second_order_layer(a, h2, w2, b, Activation::kRelu), sigma, 2)),
              1e-9);
    EXPECT_LT(max_abs_diff(contract_to_first_order(perm(h2, sigma, 2), wc, std::nullopt),
                           perm(contract_to_first_order(h2, wc, std::nullopt), sigma, 1)),
              1e-9);
    EXPECT_LT(max_abs_diff(readout_invariant(perm(h1, sigma, 1)), readout_invariant(h1)), 1e-9);
  }
}

TEST(EquivarianceSuite, StackedNetworksAndReadout) {
  Rng rng(8);
  for (int order : {1, 2}) {
    const LayerParams p = make_layer_params(order, {3, 5, 5, 2}, Activation::kSigmoid, Activation::kIdentity, rng);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 2 + rng.index(5);
      const auto sigma = oracle::random_permutation(n, rng);
      const Tensor a = oracle::random_graph(n, 0.5, rng).adjacency;
      const Tensor h = order == 1 ? oracle::random_tensor({n, 3}, rng) : oracle::random_tensor({n, n, 3}, rng);
      const std::size_t axes = static_cast<std::size_t>(order);
      const Tensor out = apply_stack(a, h, p);
      const Tensor out_p = apply_stack(perm(a, sigma, 2), perm(h, sigma, axes), p);
      EXPECT_LT(max_abs_diff(out_p, perm(out, sigma, axes)), 1e-9);
      if (order == 1) EXPECT_LT(max_abs_diff(readout_invariant(out_p), readout_invariant(out)), 1e-9);
    }
  }
}

TEST(GradCheck, Layers) {
  Rng rng(9);
  const Tensor a = oracle::random_graph(4, 0.5, rng).adjacency;
  const Tensor w1 = oracle::random_tensor({2, 3}, rng);
  const Tensor w2 = oracle::random_tensor({12, 3}, rng);
  const Tensor wc = oracle::random_tensor({4, 3}, rng);
  const Tensor b = oracle::random_tensor({3}, rng);
  const Tensor fe = oracle::random_tensor({4, 4, 1}, rng);
  for (int point = 0; point < 10; ++point) {
    const Tensor h1 = oracle::random_tensor({4, 2}, rng);
    const Tensor h2 = oracle::random_tensor({4, 4, 2}, rng);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(mpnn_layer(a, x, w1, b, Activation::kSigmoid))); }, h1),
              1e-4);
    EXPECT_LT(grad_check([&](const Tensor& w) { return sum(square(mpnn_layer(a, h1, w, b, Activation::kSigmoid))); }, w1),
              1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(second_order_layer(a, x, w2, b, Activation::kSigmoid))); },
                         h2),
              1e-4);
    EXPECT_LT(grad_check([&](const Tensor& w) { return sum(square(second_order_layer(a, h2, w, b, Activation::kSigmoid))); },
                         w2),
              1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(contract_to_first_order(x, wc, b))); }, h2), 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(promote_features(x, fe))); }, h1), 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(readout_invariant(x))); }, h1), 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(append_identity_channel(x))); }, h2), 1e-4);
    EXPECT_LT(grad_check([&](const Tensor& x) { return sum(square(diagonal(x))); }, h2), 1e-4);
  }
}
