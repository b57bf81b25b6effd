#include "mgvae/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <cmath>

#include "mgvae/cluster.hpp"
#include "mgvae/error.hpp"
#include "mgvae/ops.hpp"
#include "mgvae/optim.hpp"

namespace mgvae {

std::vector<EpochRecord> train(Model& model, const std::vector<Graph>& dataset, const TrainOptions& options) {
  if (dataset.empty()) throw DomainError("train: empty dataset");
  if (options.batch == 0) throw DomainError("train: batch size must be positive");
  if (!(options.lr >= 0.0)) throw DomainError("train: learning rate must be non-negative");
  model.set_data_statistics(dataset);
  Adam adam(model.parameters(), AdamOptions{options.lr});
  Rng root(options.seed);
  std::vector<std::size_t> order(dataset.size());
  std::vector<EpochRecord> trace;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng erng = root.split(epoch);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[erng.index(i)]);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      const std::size_t stop = std::min(order.size(), start + options.batch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      adam.zero_grad();
      std::optional<Tensor> step;
      for (std::size_t b = start; b < stop; ++b) {
        EncodeOptions enc;
        enc.mode = EncodeMode::kTrain;
        enc.seed = erng.next_u64();
        const Hierarchy h = encode_hierarchy(dataset[order[b]], model, enc);
        const LossTerms t = total_loss_terms(h, model);
        rec.loss += t.total.item();
        rec.recon += t.recon;
        rec.kl += t.kl;
        rec.balance += t.balance;
        const Tensor scaled = scale(t.total, inv);
        step = step ? add(*step, scaled) : scaled;
      }
      step->backward();
      adam.step();
    }
    const double n = static_cast<double>(dataset.size());
    rec.loss /= n;
    rec.recon /= n;
    rec.kl /= n;
    rec.balance /= n;
    trace.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return trace;
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "epoch,loss,recon,kl,balance\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << r.loss << ',' << r.recon << ',' << r.kl << ',' << r.balance << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ClusterNet::ClusterNet(std::size_t input_dim, std::size_t k, std::size_t depth, std::size_t hidden,
                       std::uint64_t seed, Activation activation)
    : k_(k) {
  if (k == 0 || depth == 0 || hidden == 0 || input_dim == 0) {
    throw DomainError("ClusterNet: dimensions must be positive");
  }
  Rng rng(seed);
  std::vector<std::size_t> channels{input_dim};
  channels.insert(channels.end(), depth - 1, hidden);
  channels.push_back(k);
  params_ = make_layer_params(1, channels, activation, Activation::kIdentity, rng);
}

Tensor ClusterNet::logits(const Graph& g) const { return cluster_logits(g, params_); }

ClusterAssignment ClusterNet::assign(const Graph& g) const {
  if (k_ > g.num_nodes()) throw DomainError("K exceeds the number of nodes");
  NoGradGuard no_grad;
  return argmax_assign(logits(g));
}

std::vector<double> train_clustering(ClusterNet& net, const std::vector<Graph>& graphs,
                                     const ClusterTrainOptions& options) {
  if (graphs.empty()) throw DomainError("train_clustering: no graphs");
  Adam adam(net.params().parameters(), AdamOptions{options.lr});
  Rng root(options.seed);
  std::vector<double> trace;
  const double inv = 1.0 / static_cast<double>(graphs.size());
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng erng = root.split(epoch);
    adam.zero_grad();
    Tensor loss = Tensor::scalar(0.0);
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      Rng grng = erng.split(i);
      const GumbelSample s = gumbel_assign(net.logits(graphs[i]), grng);
      loss = add(loss, scale(balance_kl(s.relaxed), inv));
    }
    if (!std::isfinite(loss.item())) throw NumericError("train_clustering: non-finite balance loss");
    trace.push_back(loss.item());
    loss.backward();
    adam.step();
  }
  return trace;
}

}  // namespace mgvae
