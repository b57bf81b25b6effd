#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mgvae/assignment.hpp"
#include "mgvae/checkpoint.hpp"
#include "mgvae/cluster.hpp"
#include "mgvae/equivariant.hpp"
#include "mgvae/graph.hpp"
#include "mgvae/probabilistic.hpp"
#include "mgvae/tensor.hpp"

namespace mgvae {

enum class PriorKind { kStandard, kLearnable };
enum class EncodeMode { kTrain, kEval };

// Levels are numbered ℓ = L (input graph) down to 1. Level ℓ partitions its
// graph G^(ℓ) into K^(ℓ) clusters; the coarsened graph is G^(ℓ-1). K^(1) = 1,
// so level 1 pools everything into a single apex node. Per-level vectors are
// indexed by ℓ - 1.
struct ModelConfig {
  std::size_t levels = 2;
  std::vector<std::size_t> clusters{1, 2};
  std::vector<int> order{1, 1};
  std::size_t depth = 2;
  std::size_t hidden = 16;
  std::size_t latent_dim = 4;
  std::size_t input_dim = kDegreeBuckets;
  std::size_t edge_dim = 0;
  std::size_t cluster_depth = 2;
  std::size_t cluster_hidden = 16;
  std::vector<double> lambda{1.0, 1.0};
  Activation activation = Activation::kSigmoid;
  PriorKind prior = PriorKind::kStandard;
  MatchMode match = MatchMode::kFree;
  // Prior support at level L; 0 means max_nodes. Coarser levels use K^(ℓ+1).
  std::size_t prior_support = 0;
  std::size_t max_nodes = 20;
  bool global_decoder = false;
  std::size_t global_hidden = 128;
  bool feature_recon = false;
  // Regression head over concatenated per-level readouts; 0 disables it.
  std::size_t head_hidden = 0;
  double jitter = kDefaultJitter;

  // Throws DomainError on inconsistent settings.
  void validate() const;
  std::size_t clusters_at(std::size_t level) const { return clusters.at(level - 1); }
  int order_at(std::size_t level) const { return order.at(level - 1); }
  double lambda_at(std::size_t level) const { return lambda.at(level - 1); }
  std::size_t prior_support_at(std::size_t level) const;
};

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

struct EncoderParams {
  LayerParams stack;
  Tensor mu_w, mu_b;    // order 1: (c, d_z); order 2: (2c, d_z)
  Tensor aux_w, aux_b;  // order 1: log σ head (c, d_z); order 2: factor head (c + 1, d_z)
};

struct LevelParams {
  EncoderParams encoder;
  std::optional<LayerParams> clustering;  // absent when K^(ℓ) = 1
  std::optional<LearnablePrior> prior;
};

struct DenseParams {
  Tensor w0, b0, w1, b1;
};

struct LevelState {
  std::size_t level = 0;
  Graph graph;                     // G^(ℓ)
  ClusterAssignment assignment;    // empty clusters dropped
  std::size_t requested_clusters = 0;
  Tensor assignment_matrix;        // (n, K) relaxed in train mode, hard otherwise
  Tensor balance;                  // λ-free balanced-cut term of this level
  std::vector<std::vector<std::size_t>> members;
  std::vector<GaussianState> posteriors;  // one per cluster, rows in member order
  Tensor z;                        // (n, d_z) in node order
  Tensor mu;                       // (n, d_z) posterior means in node order
};

struct Hierarchy {
  std::vector<LevelState> levels;  // levels[ℓ - 1]
  Tensor apex;                     // (1, d_z) pooled summary of level 1
  std::vector<std::string> warnings;

  LevelState& at(std::size_t level) { return levels.at(level - 1); }
  const LevelState& at(std::size_t level) const { return levels.at(level - 1); }
  std::size_t depth() const { return levels.size(); }
};

struct LossTerms {
  Tensor total;
  double recon = 0.0;
  double kl = 0.0;
  double balance = 0.0;
};

class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  LevelParams& level(std::size_t l) { return levels_.at(l - 1); }
  const LevelParams& level(std::size_t l) const { return levels_.at(l - 1); }
  const std::optional<DenseParams>& global_decoder() const { return global_; }
  const std::optional<DenseParams>& head() const { return head_; }
  const std::optional<DenseParams>& feature_head() const { return feature_head_; }

  std::vector<Tensor> parameters() const;
  TensorMap named_parameters() const;
  // Copies values from `tensors` into the parameters; throws FormatError on a
  // missing name or shape mismatch.
  void load_parameters(const TensorMap& tensors);

  // Empirical node and edge counts of the training graphs, used by generate().
  void set_data_statistics(const std::vector<Graph>& graphs);
  const std::vector<std::size_t>& node_counts() const { return node_counts_; }
  const std::vector<std::size_t>& edge_counts() const { return edge_counts_; }
  void set_counts(std::vector<std::size_t> nodes, std::vector<std::size_t> edges);

 private:
  ModelConfig config_;
  std::vector<LevelParams> levels_;
  std::optional<DenseParams> global_;
  std::optional<DenseParams> head_;
  std::optional<DenseParams> feature_head_;
  std::vector<std::size_t> node_counts_;
  std::vector<std::size_t> edge_counts_;
};

// Local encoder of one cluster: (sub)graph -> Gaussian posterior.
GaussianState encode_local(const Graph& g, const EncoderParams& params, int order);

struct EncodeOptions {
  EncodeMode mode = EncodeMode::kTrain;
  std::uint64_t seed = 0;
  // Hard assignments used in place of the clustering networks, level ℓ at
  // index ℓ - 1. The balanced-cut terms become constants.
  const std::vector<ClusterAssignment>* frozen = nullptr;
};

Hierarchy encode_hierarchy(const Graph& g, const Model& model, const EncodeOptions& options);

// Edge logits Z Zᵀ and probabilities sigmoid(Z Zᵀ).
Tensor decode_local_logits(const Tensor& z);
Tensor decode_local(const Tensor& z);

// Symmetric (n_max, n_max) logits / probabilities from a zero-padded
// (n_max, d_z) latent matrix.
Tensor decode_global_logits(const Tensor& z_padded, const DenseParams& params);
Tensor decode_global(const Tensor& z_padded, const DenseParams& params);

// Negative multiresolution ELBO summed over levels; the total_* variants add
// Σ λ^(ℓ) · balance.
LossTerms elbo_terms(const Hierarchy& h, const Model& model);
Tensor elbo_loss(const Hierarchy& h, const Model& model);
LossTerms total_loss_terms(const Hierarchy& h, const Model& model);
Tensor total_loss(const Hierarchy& h, const Model& model);

// Prediction of the regression head from concatenated per-level mean
// readouts of the posterior means.
Tensor predict(const Hierarchy& h, const Model& model);
// ||f(⊕_ℓ R(μ^(ℓ))) − y||² + Σ λ^(ℓ) · balance.
Tensor mgn_supervised_loss(const Hierarchy& h, double target, const Model& model);

enum class GenerateMode { kThreshold, kCorrective };

struct GenerateOptions {
  std::size_t count = 1;
  // 0 draws the node count from the training distribution.
  std::size_t nodes = 0;
  GenerateMode mode = GenerateMode::kThreshold;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  // Index of the first sample; sample s draws from stream split(first + s), so
  // disjoint ranges can be generated independently.
  std::size_t first = 0;
};

// Samples level-L latents from the prior and decodes them into graphs.
std::vector<Graph> generate(const Model& model, const GenerateOptions& options);

// Checkpoint with all parameters and data statistics, plus a sidecar JSON
// file with the configuration (same path, extension ".json").
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);
std::filesystem::path config_sidecar(const std::filesystem::path& checkpoint);

}  // namespace mgvae
