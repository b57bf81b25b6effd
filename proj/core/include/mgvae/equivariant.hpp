#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mgvae/ops.hpp"
#include "mgvae/rng.hpp"
#include "mgvae/tensor.hpp"

namespace mgvae {

// Glorot-uniform (fan_in, fan_out) weight matrix, tracked.
Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// A stack of T equivariant layers of one order.
//
//   order 1: layer t maps (n, channels[t-1]) -> (n, channels[t]),
//            W_t has shape (channels[t-1], channels[t])
//   order 2: layer t maps (n, n, channels[t-1]) -> (n, n, channels[t]),
//            W_t has shape (6 * channels[t-1], channels[t])
//
// `hidden` is applied after every layer but the last, `output` after the last.
struct LayerParams {
  int order = 1;
  std::vector<std::size_t> channels;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  Activation hidden = Activation::kSigmoid;
  Activation output = Activation::kSigmoid;

  std::size_t depth() const { return weights.size(); }
  std::size_t in_channels() const { return channels.front(); }
  std::size_t out_channels() const { return channels.back(); }
  std::vector<Tensor> parameters() const;
  // Throws DimensionError when weight shapes disagree with `channels`.
  void validate() const;
};

// channels = {d_in, c_1, ..., c_T}; T = channels.size() - 1 >= 1.
LayerParams make_layer_params(int order, std::vector<std::size_t> channels, Activation hidden,
                              Activation output, Rng& rng);

// D̂⁻¹Â with Â = A + I. With `self_loops` false the raw D⁻¹A is returned and
// rows of isolated nodes are zero.
Tensor normalized_adjacency(const Tensor& adjacency, bool self_loops = true);

// H' = γ(D̂⁻¹ÂHW + b).
Tensor mpnn_layer(const Tensor& adjacency, const Tensor& h, const Tensor& w,
                  const std::optional<Tensor>& b, Activation act, bool self_loops = true);

// (n, d_v) node features and (n, n, d_e) edge features -> (n, n, d_v + d_e)
// with node features on the diagonal of the leading channels.
Tensor promote_features(const Tensor& node_features, const Tensor& edge_features);

// The six contractions of A ⊗ H over unordered axis pairs, in lexicographic
// order {0,1}, {0,2}, {0,3}, {1,2}, {1,3}, {2,3}, stacked along channels:
// output (n, n, 6d) with block k occupying channels [k d, (k + 1) d).
Tensor pair_contractions(const Tensor& adjacency, const Tensor& h);

// γ(linear(pair_contractions(A, H))).
Tensor second_order_layer(const Tensor& adjacency, const Tensor& h, const Tensor& w,
                          const std::optional<Tensor>& b, Activation act);

// Runs every layer of `params` (order 1 or 2).
Tensor apply_stack(const Tensor& adjacency, const Tensor& h, const LayerParams& params);

// (n, n, d) -> (n, d): diagonal entries H[i, i, :].
Tensor diagonal(const Tensor& h);
// (n, n, d) -> (n, n, d + 1) with the identity appended as a last channel.
Tensor append_identity_channel(const Tensor& h);

// linear([row-sum, diagonal]) : (n, n, d) -> (n, d_out), W of shape (2d, d_out).
Tensor contract_to_first_order(const Tensor& h, const Tensor& w, const std::optional<Tensor>& b);

// Column mean of an (n, d) matrix. Throws DimensionError when n = 0.
Tensor readout_invariant(const Tensor& z);

}  // namespace mgvae
