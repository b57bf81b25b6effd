#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "mgvae/checkpoint.hpp"
#include "mgvae/error.hpp"
#include "mgvae/grad_check.hpp"
#include "mgvae/ops.hpp"
#include "mgvae/optim.hpp"
#include "oracles.hpp"

using namespace mgvae;

namespace {

void expect_values(const Tensor& t, const std::vector<double>& expected, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.data()[i], expected[i], tol) << "entry " << i;
}

}  // namespace

TEST(Tensor, ShapeAndDataAgree) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.dim(), 3u);
}

TEST(Linear, IdentityWeights) {
  expect_values(linear(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0})), {1, 2});
}

TEST(Linear, DotProductPlusBias) {
  expect_values(linear(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}}), Tensor::vector({1})), {12});
}

TEST(Linear, ShapeMismatchThrows) {
  EXPECT_THROW(linear(Tensor::zeros({2, 3}), Tensor::zeros({4, 2})), DimensionError);
}

TEST(Elementwise, Sigmoid) {
  EXPECT_DOUBLE_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
  EXPECT_NEAR(elementwise(Tensor::scalar(1.0), Pointwise::kSigmoid).item(), 0.7310585786, 1e-10);
}

TEST(Elementwise, LogOfNegativeThrows) {
  EXPECT_THROW(log(Tensor::scalar(-1.0)), DomainError);
  EXPECT_THROW(elementwise(Tensor::vector({1.0, 0.0}), Pointwise::kLog), DomainError);
}

TEST(Elementwise, BinaryBroadcastsScalars) {
  expect_values(elementwise(Tensor::vector({1, 2}), Pointwise::kAdd, 3.0), {4, 5});
  expect_values(elementwise(Tensor::vector({1, 2}), Pointwise::kMul, Tensor::scalar(2.0)), {2, 4});
  expect_values(elementwise(Tensor::vector({1, 2}), Pointwise::kSub, Tensor::vector({1, 1})), {0, 1});
  EXPECT_THROW(add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})), DimensionError);
}

TEST(TensorProduct, OuterProduct) {
  const Tensor c = tensor_product(Tensor::vector({1, 2}), Tensor::vector({3, 4}));
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  expect_values(c, {3, 4, 6, 8});
}

TEST(TensorProduct, ScalarIdentityAndZero) {
  const Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  expect_values(tensor_product(a, Tensor::scalar(1.0)), {1, 2, 3, 4});
  const Tensor z = tensor_product(Tensor::scalar(0.0), a);
  EXPECT_EQ(z.numel(), 4u);
  expect_values(z, {0, 0, 0, 0});
}

TEST(Contract, TraceOfIdentity) { EXPECT_DOUBLE_EQ(contract(Tensor::eye(3), {0, 1}).item(), 3.0); }

TEST(Contract, PairOfAxesIsTheDiagonalSum) {
  // Contracted axes share one running index (Kronecker delta), so a matrix
  // contracts to its trace.
  EXPECT_DOUBLE_EQ(contract(Tensor::matrix({{1, 2}, {3, 4}}), {0, 1}).item(), 5.0);
}

TEST(Contract, MiddleAxesOfOrderFourProduct) {
  const Tensor v = Tensor::vector({1, 1});
  const Tensor t = tensor_product(tensor_product(v, v), tensor_product(v, v));
  const Tensor c = contract(t, {1, 2});
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  expect_values(c, {2, 2, 2, 2});
}

TEST(Contract, Errors) {
  EXPECT_THROW(contract(Tensor::eye(3), {0, 2}), DimensionError);
  EXPECT_THROW(contract(Tensor::zeros({2, 3}), {0, 1}), DimensionError);
}

TEST(Contract, MatchesBruteForce) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = oracle::random_tensor({3, 3, 3, 2}, rng);
    for (const std::vector<std::size_t>& axes :
         std::vector<std::vector<std::size_t>>{{0}, {1, 2}, {0, 2}, {0, 1, 2}, {3}}) {
      const Tensor mine = contract(a, std::span<const std::size_t>(axes));
      const Tensor ref = oracle::contract(a, axes);
      EXPECT_EQ(mine.shape(), ref.shape());
      EXPECT_LT(max_abs_diff(mine, ref), 1e-12);
    }
  }
}

TEST(TensorProperties, ContractionOfProductIsMatmul) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.index(4);
    const Tensor a = oracle::random_tensor({n, n}, rng);
    const Tensor b = oracle::random_tensor({n, n}, rng);
    EXPECT_LT(max_abs_diff(contract(tensor_product(a, b), {1, 2}), matmul(a, b)), 1e-12);
  }
}

TEST(TensorProperties, ContractionCommutesWithNodePermutation) {
  Rng rng(5);
  for (std::size_t n = 1; n <= 5; ++n) {
    for (int trial = 0; trial < 5; ++trial) {
      const Tensor a = tensor_product(oracle::random_tensor({n, n}, rng), oracle::random_tensor({n}, rng));
      const auto sigma = oracle::random_permutation(n, rng);
      for (const std::vector<std::size_t>& axes : std::vector<std::vector<std::size_t>>{{0, 1}, {1, 2}, {0, 2}, {2}}) {
        const Tensor lhs = contract(permute_node_axes(a, sigma, 3), std::span<const std::size_t>(axes));
        const Tensor rhs = permute_node_axes(contract(a, std::span<const std::size_t>(axes)), sigma, 3 - axes.size());
        EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
      }
    }
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::vector({1, 2, 3}).set_requires_grad(true);
  ASSERT_TRUE(sum(x).backward());
  expect_values(Tensor({3}, std::vector<double>(x.grad().begin(), x.grad().end())), {1, 1, 1});
}

TEST(Backward, SquareGivesTwoX) {
  Tensor x = Tensor::vector({1, 2}).set_requires_grad(true);
  sum(mul(x, x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
}

TEST(Backward, SigmoidDerivativeAtZero) {
  Tensor x = Tensor::scalar(0.0, true);
  sigmoid(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
}

TEST(Backward, AccumulatesAcrossCalls) {
  Tensor x = Tensor::vector({1, 2}).set_requires_grad(true);
  sum(x).backward();
  sum(x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);
}

TEST(Backward, NonScalarAndDisconnected) {
  Tensor x = Tensor::vector({1, 2}).set_requires_grad(true);
  EXPECT_THROW(x.backward(), DimensionError);
  EXPECT_FALSE(sum(Tensor::vector({1, 2})).backward());
}

TEST(Backward, UntrackedTensorsGetNoGradient) {
  Tensor x = Tensor::vector({1, 2}).set_requires_grad(true);
  const Tensor c = Tensor::vector({3, 4});
  sum(mul(x, c)).backward();
  EXPECT_FALSE(c.has_grad());
}

TEST(Backward, LinearityOverSummedLosses) {
  Rng rng(9);
  Tensor x = oracle::random_tensor({3, 2}, rng, true);
  const Tensor w = oracle::random_tensor({2, 2}, rng);
  auto f = [&] { return sum(sigmoid(linear(x, w))); };
  auto g = [&] { return sum(square(x)); };
  add(f(), g()).backward();
  const std::vector<double> joint(x.grad().begin(), x.grad().end());
  x.zero_grad();
  f().backward();
  g().backward();
  for (std::size_t i = 0; i < joint.size(); ++i) EXPECT_NEAR(joint[i], x.grad()[i], 1e-12);
}

TEST(Backward, NoGradGuardSkipsTape) {
  Tensor x = Tensor::vector({1, 2}).set_requires_grad(true);
  NoGradGuard guard;
  EXPECT_FALSE(sum(x).requires_grad());
}

TEST(GradCheck, Examples) {
  Rng rng(1);
  const Tensor x = oracle::random_tensor({4}, rng);
  EXPECT_LT(grad_check([](const Tensor& t) { return sum(square(t)); }, x), 1e-6);
  EXPECT_EQ(grad_check([](const Tensor&) { return Tensor::scalar(2.0); }, x), 0.0);
  EXPECT_LT(grad_check([](const Tensor& t) { return sum(sigmoid(t)); }, x), 1e-5);
}

TEST(GradCheck, NonFiniteThrows) {
  EXPECT_THROW(grad_check([](const Tensor& t) { return sum(log(t)); }, Tensor::vector({1e-7})), std::exception);
}

TEST(GradCheck, EveryOpAtRandomPoints) {
  Rng rng(21);
  const Tensor w = oracle::random_tensor({3, 2}, rng);
  const Tensor m = oracle::random_tensor({2, 3}, rng);
  const Tensor other = oracle::random_tensor({2, 3}, rng);
  const Tensor targets = Tensor({2, 3}, {1, 0, 1, 0, 0, 1});
  const std::vector<std::pair<std::string, ScalarFn>> ops{
      {"add", [&](const Tensor& x) { return sum(square(add(x, other))); }},
      {"sub", [&](const Tensor& x) { return sum(square(sub(other, x))); }},
      {"mul", [&](const Tensor& x) { return sum(mul(x, other)); }},
      {"scalar mul", [&](const Tensor& x) { return sum(mul(x, Tensor::scalar(1.7))); }},
      {"scale", [&](const Tensor& x) { return sum(square(scale(x, -2.5))); }},
      {"add_scalar", [&](const Tensor& x) { return sum(square(add_scalar(x, 0.3))); }},
      {"neg", [&](const Tensor& x) { return sum(mul(neg(x), other)); }},
      {"sigmoid", [&](const Tensor& x) { return sum(mul(sigmoid(x), other)); }},
      {"relu", [&](const Tensor& x) { return sum(mul(relu(add_scalar(x, 0.05)), other)); }},
      {"exp", [&](const Tensor& x) { return sum(exp(x)); }},
      {"log", [&](const Tensor& x) { return sum(log(add_scalar(square(x), 0.5))); }},
      {"linear", [&](const Tensor& x) { return sum(square(linear(x, w, Tensor::vector({0.1, -0.2})))); }},
      {"matmul", [&](const Tensor& x) { return sum(square(matmul(x, transpose(m)))); }},
      {"transpose", [&](const Tensor& x) { return sum(mul(transpose(x), transpose(other))); }},
      {"mean", [&](const Tensor& x) { return square(mean(x)); }},
      {"mean_rows", [&](const Tensor& x) { return sum(square(mean_rows(x))); }},
      {"reshape", [&](const Tensor& x) { return sum(mul(reshape(x, {3, 2}), w)); }},
      {"concat_last", [&](const Tensor& x) { return sum(square(concat_last({x, other, x}))); }},
      {"concat_rows", [&](const Tensor& x) { return sum(square(concat_rows({other, x}))); }},
      {"gather_rows", [&](const Tensor& x) {
         const std::vector<std::size_t> rows{1, 0, 1};
         return sum(square(gather_rows(x, rows)));
       }},
      {"pad_rows", [&](const Tensor& x) { return sum(square(pad_rows(x, 4))); }},
      {"top_left", [&](const Tensor& x) { return sum(square(top_left(x, 1, 2))); }},
      {"symmetrize", [&](const Tensor& x) { return sum(square(symmetrize(matmul(transpose(x), other)))); }},
      {"softmax_rows", [&](const Tensor& x) { return sum(mul(softmax_rows(x), other)); }},
      {"bce", [&](const Tensor& x) { return bce_with_logits(x, targets); }},
      {"masked bce", [&](const Tensor& x) { return bce_with_logits(x, targets, Tensor({2, 3}, {1, 1, 0, 1, 0, 1})); }},
      {"tensor_product", [&](const Tensor& x) { return sum(square(tensor_product(x, other))); }},
      {"contract", [&](const Tensor& x) { return sum(square(contract(tensor_product(x, x), {0, 2}))); }},
  };
  for (const auto& [name, f] : ops) {
    for (int point = 0; point < 10; ++point) {
      const Tensor x = oracle::random_tensor({2, 3}, rng);
      EXPECT_LT(grad_check(f, x), 1e-4) << name << " at point " << point;
    }
  }
}

TEST(StraightThrough, ForwardHardBackwardSoft) {
  Tensor soft = Tensor::vector({0.3, 0.7}).set_requires_grad(true);
  const Tensor hard = Tensor::vector({0, 1});
  const Tensor st = straight_through(hard, soft);
  expect_values(st, {0, 1});
  sum(mul(st, Tensor::vector({2, 5}))).backward();
  EXPECT_DOUBLE_EQ(soft.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(soft.grad()[1], 5.0);
}

TEST(Checkpoint, RoundTripAndBadMagic) {
  const auto dir = std::filesystem::temp_directory_path() / "mgvae_ckpt_test";
  std::filesystem::create_directories(dir);
  TensorMap m{{"a", Tensor::matrix({{1, 2}, {3, 4}})}, {"b", Tensor::vector({0.1})}};
  save_checkpoint(dir / "x.ckpt", m);
  const TensorMap back = load_checkpoint(dir / "x.ckpt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("a").shape(), (Shape{2, 2}));
  EXPECT_EQ(max_abs_diff(back.at("a"), m.at("a")), 0.0);
  EXPECT_EQ(back.at("b").item(), 0.1);
  {
    std::fstream f(dir / "x.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
  }
  EXPECT_THROW(load_checkpoint(dir / "x.ckpt"), FormatError);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  Tensor p = Tensor::vector({1, -2}).set_requires_grad(true);
  Adam adam({p}, AdamOptions{0.0});
  sum(square(p)).backward();
  adam.step();
  expect_values(p, {1, -2}, 0.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::vector({1, -2}).set_requires_grad(true);
  Adam adam({p}, AdamOptions{0.1});
  sum(square(p)).backward();
  adam.step();
  // The bias-corrected first step is lr · sign(g).
  expect_values(p, {0.9, -1.9}, 1e-7);
}
