#include "mgvae/equivariant.hpp"

#include <cmath>

#include "mgvae/error.hpp"

namespace mgvae {

namespace {

using Grads = std::span<const std::span<double>>;

void require_square(const Tensor& a, const char* op) {
  if (a.dim() != 2 || a.size(0) != a.size(1)) {
    throw DimensionError(std::string(op) + ": adjacency must be square, got " + shape_str(a.shape()));
  }
}

void require_pair_tensor(const Tensor& h, std::size_t n, const char* op) {
  if (h.dim() != 3 || h.size(0) != h.size(1) || (n != SIZE_MAX && h.size(0) != n)) {
    throw DimensionError(std::string(op) + ": expected (n, n, d) tensor, got " + shape_str(h.shape()));
  }
}

}  // namespace

Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(fan_in * fan_out);
  for (double& v : data) v = rng.uniform(-limit, limit);
  return Tensor({fan_in, fan_out}, std::move(data), true);
}

std::vector<Tensor> LayerParams::parameters() const {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    out.push_back(weights[t]);
    out.push_back(biases[t]);
  }
  return out;
}

void LayerParams::validate() const {
  if (order != 1 && order != 2) throw DimensionError("layer order must be 1 or 2");
  if (weights.empty()) throw DimensionError("layer stack needs depth >= 1");
  if (channels.size() != weights.size() + 1 || biases.size() != weights.size()) {
    throw DimensionError("layer stack: channel list does not match depth");
  }
  const std::size_t mult = order == 2 ? 6 : 1;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    const Shape want{mult * channels[t], channels[t + 1]};
    if (weights[t].shape() != want || biases[t].shape() != Shape{channels[t + 1]}) {
      throw DimensionError("layer " + std::to_string(t) + ": weight shape " +
                           shape_str(weights[t].shape()) + ", expected " + shape_str(want));
    }
  }
}

LayerParams make_layer_params(int order, std::vector<std::size_t> channels, Activation hidden,
                              Activation output, Rng& rng) {
  if (channels.size() < 2) throw DimensionError("layer stack needs depth >= 1");
  LayerParams p;
  p.order = order;
  p.hidden = hidden;
  p.output = output;
  const std::size_t mult = order == 2 ? 6 : 1;
  for (std::size_t t = 0; t + 1 < channels.size(); ++t) {
    p.weights.push_back(glorot(mult * channels[t], channels[t + 1], rng));
    p.biases.push_back(Tensor::zeros({channels[t + 1]}, true));
  }
  p.channels = std::move(channels);
  p.validate();
  return p;
}

Tensor normalized_adjacency(const Tensor& adjacency, bool self_loops) {
  require_square(adjacency, "normalized_adjacency");
  const std::size_t n = adjacency.size(0);
  const auto a = adjacency.data();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = self_loops ? 1.0 : 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a[i * n + j];
    if (deg == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = (a[i * n + j] + (self_loops && i == j ? 1.0 : 0.0)) / deg;
    }
  }
  return Tensor({n, n}, std::move(out));
}

Tensor mpnn_layer(const Tensor& adjacency, const Tensor& h, const Tensor& w,
                  const std::optional<Tensor>& b, Activation act, bool self_loops) {
  require_square(adjacency, "mpnn_layer");
  if (h.dim() != 2 || h.size(0) != adjacency.size(0)) {
    throw DimensionError("mpnn_layer: features " + shape_str(h.shape()) + " do not match " +
                         std::to_string(adjacency.size(0)) + " nodes");
  }
  const Tensor messages = matmul(normalized_adjacency(adjacency, self_loops), h);
  return activate(linear(messages, w, b), act);
}

Tensor promote_features(const Tensor& node_features, const Tensor& edge_features) {
  if (node_features.dim() != 2 || edge_features.dim() != 3 ||
      edge_features.size(0) != node_features.size(0) || edge_features.size(1) != node_features.size(0)) {
    throw DimensionError("promote_features: inconsistent node count");
  }
  const std::size_t n = node_features.size(0);
  const std::size_t dv = node_features.size(1);
  const std::size_t de = edge_features.size(2);
  const std::size_t d = dv + de;
  std::vector<double> out(n * n * d, 0.0);
  const auto fv = node_features.data();
  const auto fe = edge_features.data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dv; ++c) out[(i * n + i) * d + c] = fv[i * dv + c];
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < de; ++c) out[(i * n + j) * d + dv + c] = fe[(i * n + j) * de + c];
  }
  return Tensor::from_op({n, n, d}, std::move(out), {node_features, edge_features},
                         [n, dv, de, d](std::span<const double> g, Grads gi) {
                           for (std::size_t i = 0; i < n; ++i) {
                             if (!gi[0].empty())
                               for (std::size_t c = 0; c < dv; ++c)
                                 gi[0][i * dv + c] += g[(i * n + i) * d + c];
                             if (!gi[1].empty())
                               for (std::size_t j = 0; j < n; ++j)
                                 for (std::size_t c = 0; c < de; ++c)
                                   gi[1][(i * n + j) * de + c] += g[(i * n + j) * d + dv + c];
                           }
                         });
}

Tensor pair_contractions(const Tensor& adjacency, const Tensor& h) {
  require_square(adjacency, "pair_contractions");
  const std::size_t n = adjacency.size(0);
  if (n == 0) throw DimensionError("pair_contractions: empty graph");
  require_pair_tensor(h, n, "pair_contractions");
  const std::size_t d = h.size(2);
  const std::size_t od = 6 * d;
  const auto A = [a = adjacency.data(), n](std::size_t i, std::size_t j) { return a[i * n + j]; };
  const auto hd = h.data();
  const auto H = [hd, n, d](std::size_t i, std::size_t j, std::size_t c) { return hd[(i * n + j) * d + c]; };

  double tr_a = 0.0;
  for (std::size_t i = 0; i < n; ++i) tr_a += A(i, i);
  std::vector<double> tr_h(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) tr_h[c] += H(i, i, c);

  std::vector<double> out(n * n * od, 0.0);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) {
      double* o = &out[(p * n + q) * od];
      for (std::size_t c = 0; c < d; ++c) {
        double s02 = 0.0, s03 = 0.0, s12 = 0.0, s13 = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          s02 += A(a, p) * H(a, q, c);
          s03 += A(a, p) * H(q, a, c);
          s12 += A(p, a) * H(a, q, c);
          s13 += A(p, a) * H(q, a, c);
        }
        o[0 * d + c] = tr_a * H(p, q, c);
        o[1 * d + c] = s02;
        o[2 * d + c] = s03;
        o[3 * d + c] = s12;
        o[4 * d + c] = s13;
        o[5 * d + c] = A(p, q) * tr_h[c];
      }
    }

  return Tensor::from_op(
      {n, n, od}, std::move(out), {adjacency, h},
      [adjacency, h, n, d, od, tr_a, tr_h](std::span<const double> g, Grads gi) {
        const auto ad = adjacency.data();
        const auto hd = h.data();
        auto A = [&](std::size_t i, std::size_t j) { return ad[i * n + j]; };
        auto H = [&](std::size_t i, std::size_t j, std::size_t c) { return hd[(i * n + j) * d + c]; };
        auto G = [&](std::size_t blk, std::size_t p, std::size_t q, std::size_t c) {
          return g[(p * n + q) * od + blk * d + c];
        };
        if (!gi[0].empty()) {
          auto& ga = gi[0];
          for (std::size_t c = 0; c < d; ++c) {
            double s01 = 0.0;
            for (std::size_t p = 0; p < n; ++p)
              for (std::size_t q = 0; q < n; ++q) {
                s01 += G(0, p, q, c) * H(p, q, c);
                ga[p * n + q] += G(5, p, q, c) * tr_h[c];
              }
            for (std::size_t i = 0; i < n; ++i) ga[i * n + i] += s01;
            for (std::size_t x = 0; x < n; ++x)
              for (std::size_t y = 0; y < n; ++y) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                  // {0,2}: dA[x,y] = Σ_q H[x,q] G[y,q]
                  acc += H(x, k, c) * G(1, y, k, c);
                  // {0,3}: dA[x,y] = Σ_q G[y,q] H[q,x]
                  acc += G(2, y, k, c) * H(k, x, c);
                  // {1,2}: dA[x,y] = Σ_q G[x,q] H[y,q]
                  acc += G(3, x, k, c) * H(y, k, c);
                  // {1,3}: dA[x,y] = Σ_q G[x,q] H[q,y]
                  acc += G(4, x, k, c) * H(k, y, c);
                }
                ga[x * n + y] += acc;
              }
          }
        }
        if (!gi[1].empty()) {
          auto& gh = gi[1];
          for (std::size_t c = 0; c < d; ++c) {
            double s23 = 0.0;
            for (std::size_t p = 0; p < n; ++p)
              for (std::size_t q = 0; q < n; ++q) s23 += G(5, p, q, c) * A(p, q);
            for (std::size_t x = 0; x < n; ++x)
              for (std::size_t y = 0; y < n; ++y) {
                double acc = tr_a * G(0, x, y, c);
                for (std::size_t k = 0; k < n; ++k) {
                  // {0,2}: dH[x,y] = Σ_p A[x,p] G[p,y]
                  acc += A(x, k) * G(1, k, y, c);
                  // {0,3}: dH[x,y] = Σ_p G[p,x] A[y,p]
                  acc += G(2, k, x, c) * A(y, k);
                  // {1,2}: dH[x,y] = Σ_p A[p,x] G[p,y]
                  acc += A(k, x) * G(3, k, y, c);
                  // {1,3}: dH[x,y] = Σ_p G[p,x] A[p,y]
                  acc += G(4, k, x, c) * A(k, y);
                }
                if (x == y) acc += s23;
                gh[(x * n + y) * d + c] += acc;
              }
          }
        }
      });
}

Tensor second_order_layer(const Tensor& adjacency, const Tensor& h, const Tensor& w,
                          const std::optional<Tensor>& b, Activation act) {
  return activate(linear(pair_contractions(adjacency, h), w, b), act);
}

Tensor apply_stack(const Tensor& adjacency, const Tensor& h, const LayerParams& params) {
  Tensor x = h;
  for (std::size_t t = 0; t < params.depth(); ++t) {
    const Activation act = t + 1 == params.depth() ? params.output : params.hidden;
    x = params.order == 1 ? mpnn_layer(adjacency, x, params.weights[t], params.biases[t], act)
                          : second_order_layer(adjacency, x, params.weights[t], params.biases[t], act);
  }
  return x;
}

Tensor diagonal(const Tensor& h) {
  require_pair_tensor(h, SIZE_MAX, "diagonal");
  const std::size_t n = h.size(0), d = h.size(2);
  std::vector<double> out(n * d);
  const auto hd = h.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = hd[(i * n + i) * d + c];
  return Tensor::from_op({n, d}, std::move(out), {h}, [n, d](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < d; ++c) gi[0][(i * n + i) * d + c] += g[i * d + c];
  });
}

Tensor append_identity_channel(const Tensor& h) {
  require_pair_tensor(h, SIZE_MAX, "append_identity_channel");
  const std::size_t n = h.size(0);
  Tensor eye = Tensor::zeros({n, n, 1});
  auto e = eye.mutable_data();
  for (std::size_t i = 0; i < n; ++i) e[i * n + i] = 1.0;
  return concat_last({h, eye});
}

Tensor contract_to_first_order(const Tensor& h, const Tensor& w, const std::optional<Tensor>& b) {
  require_pair_tensor(h, SIZE_MAX, "contract_to_first_order");
  return linear(concat_last({contract(h, {1}), diagonal(h)}), w, b);
}

Tensor readout_invariant(const Tensor& z) {
  if (z.dim() != 2 || z.size(0) == 0) {
    throw DimensionError("readout_invariant needs at least one row, got " + shape_str(z.shape()));
  }
  return mean_rows(z);
}

}  // namespace mgvae
