#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "mgvae/eval.hpp"
#include "mgvae/model.hpp"
#include "mgvae/ops.hpp"

using namespace mgvae;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.mutable_data()) v = rng.normal();
  return t;
}

Graph random_graph(std::size_t n, double p, Rng& rng) {
  std::vector<WeightedEdge> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.bernoulli(p)) edges.push_back({i, j});
  return make_graph(n, edges);
}

GaussianState random_state(std::size_t n, std::size_t d, Rng& rng) {
  Tensor l = Tensor::zeros({n, n, d});
  auto data = l.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      for (std::size_t c = 0; c < d; ++c) data[(i * n + j) * d + c] = i == j ? 1.0 + rng.uniform() : 0.3 * rng.normal();
  return {random_tensor({n, d}, rng), l, false};
}

void BM_PairContractions(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = random_graph(n, 0.3, rng).adjacency;
  const Tensor h = random_tensor({n, n, 4}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pair_contractions(a, h));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PairContractions)->RangeMultiplier(2)->Range(4, 32)->Complexity();

void BM_MpnnLayer(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor a = random_graph(n, 0.3, rng).adjacency;
  const Tensor h = random_tensor({n, 16}, rng), w = random_tensor({16, 16}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mpnn_layer(a, h, w, std::nullopt, Activation::kSigmoid));
}
BENCHMARK(BM_MpnnLayer)->RangeMultiplier(2)->Range(8, 128);

void BM_GaussianKl(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const GaussianState post = random_state(n, 4, rng), prior = random_state(n, 4, rng);
  for (auto _ : state) benchmark::DoNotOptimize(gaussian_kl(post, prior));
}
BENCHMARK(BM_GaussianKl)->RangeMultiplier(2)->Range(4, 64);

void BM_EncodeHierarchy(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  ModelConfig c;
  c.max_nodes = n;
  const Model model(c, 5);
  const Graph g = random_graph(n, 0.3, rng);
  EncodeOptions o;
  for (auto _ : state) {
    o.seed = rng.next_u64();
    benchmark::DoNotOptimize(total_loss(encode_hierarchy(g, model, o), model));
  }
}
BENCHMARK(BM_EncodeHierarchy)->Arg(12)->Arg(20)->Arg(40);

void BM_OrbitCounts(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(6);
  const Tensor a = random_graph(n, 0.3, rng).adjacency;
  for (auto _ : state) benchmark::DoNotOptimize(orbit_counts(a));
}
BENCHMARK(BM_OrbitCounts)->DenseRange(8, 20, 4);

void BM_Coarsen(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  const Graph g = random_graph(n, 0.3, rng);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.index(4);
  const ClusterAssignment pi(labels, 4);
  for (auto _ : state) benchmark::DoNotOptimize(coarsen_adjacency(g.adjacency, pi));
}
BENCHMARK(BM_Coarsen)->RangeMultiplier(4)->Range(16, 256);

}  // namespace

BENCHMARK_MAIN();
