#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "mgvae/equivariant.hpp"
#include "mgvae/graph.hpp"
#include "mgvae/model.hpp"

namespace mgvae {

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double balance = 0.0;
};

struct TrainOptions {
  double lr = 1e-3;
  std::size_t epochs = 100;
  // Graphs per optimizer step; the step loss is the mean over the batch.
  std::size_t batch = 1;
  std::uint64_t seed = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Adam on total_loss with Gumbel clustering. Graphs are visited in a seeded
// shuffled order each epoch; every step draws its own encoder seed, so a run
// is a pure function of (model, dataset, options). Records the per-epoch mean
// of each loss term. Also stores the dataset's node and edge counts on the
// model. Throws DomainError on an empty dataset and NumericError (naming the
// level and term) on a non-finite loss.
std::vector<EpochRecord> train(Model& model, const std::vector<Graph>& dataset, const TrainOptions& options);

// "epoch,loss,recon,kl,balance" with one row per record.
void write_trace_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& trace);

// Standalone clustering network trained on balance_kl alone (learn-to-cluster).
class ClusterNet {
 public:
  ClusterNet(std::size_t input_dim, std::size_t k, std::size_t depth, std::size_t hidden, std::uint64_t seed,
             Activation activation = Activation::kSigmoid);

  std::size_t clusters() const { return k_; }
  const LayerParams& params() const { return params_; }
  Tensor logits(const Graph& g) const;
  ClusterAssignment assign(const Graph& g) const;

 private:
  std::size_t k_;
  LayerParams params_;
};

struct ClusterTrainOptions {
  double lr = 1e-3;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
};

// Full-batch Adam on the mean Gumbel straight-through balance_kl over the
// graphs. Returns the per-epoch mean loss.
std::vector<double> train_clustering(ClusterNet& net, const std::vector<Graph>& graphs,
                                     const ClusterTrainOptions& options);

}  // namespace mgvae
