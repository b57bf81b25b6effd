#include "mgvae/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mgvae/error.hpp"

namespace mgvae {

namespace {

using Grads = std::span<const std::span<double>>;

enum class Broadcast { kSame, kScalarA, kScalarB };

Broadcast check_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalarB;
  if (a.numel() == 1) return Broadcast::kScalarA;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

template <typename F>
Tensor unary(const Tensor& x, F f) {
  // f(value) -> (output, derivative)
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  std::vector<double> deriv(x.requires_grad() ? xd.size() : 0);
  for (std::size_t i = 0; i < xd.size(); ++i) {
    auto [y, dy] = f(xd[i]);
    out[i] = y;
    if (!deriv.empty()) deriv[i] = dy;
  }
  return Tensor::from_op(x.shape(), std::move(out), {x},
                         [deriv = std::move(deriv)](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * deriv[i];
                         });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary(a, b, "add");
  const auto ad = a.data();
  const auto bd = b.data();
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = ad[mode == Broadcast::kScalarA ? 0 : i] + bd[mode == Broadcast::kScalarB ? 0 : i];
  }
  return Tensor::from_op(shape, std::move(out), {a, b}, [mode](std::span<const double> g, Grads gi) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!gi[0].empty()) gi[0][mode == Broadcast::kScalarA ? 0 : i] += g[i];
      if (!gi[1].empty()) gi[1][mode == Broadcast::kScalarB ? 0 : i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary(a, b, "sub");
  const auto ad = a.data();
  const auto bd = b.data();
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = ad[mode == Broadcast::kScalarA ? 0 : i] - bd[mode == Broadcast::kScalarB ? 0 : i];
  }
  return Tensor::from_op(shape, std::move(out), {a, b}, [mode](std::span<const double> g, Grads gi) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!gi[0].empty()) gi[0][mode == Broadcast::kScalarA ? 0 : i] += g[i];
      if (!gi[1].empty()) gi[1][mode == Broadcast::kScalarB ? 0 : i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const Broadcast mode = check_binary(a, b, "mul");
  const Shape shape = mode == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = ad[mode == Broadcast::kScalarA ? 0 : i] * bd[mode == Broadcast::kScalarB ? 0 : i];
  }
  return Tensor::from_op(shape, std::move(out), {a, b},
                         [mode, a, b](std::span<const double> g, Grads gi) {
                           const auto ad = a.data();
                           const auto bd = b.data();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             const std::size_t ia = mode == Broadcast::kScalarA ? 0 : i;
                             const std::size_t ib = mode == Broadcast::kScalarB ? 0 : i;
                             if (!gi[0].empty()) gi[0][ia] += g[i] * bd[ib];
                             if (!gi[1].empty()) gi[1][ib] += g[i] * ad[ia];
                           }
                         });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return std::pair{v * factor, factor}; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double v) { return std::pair{v + value, 1.0}; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary(a, [](double v) { return std::pair{v * v, 2.0 * v}; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, [](double v) {
    const double s = stable_sigmoid(v);
    return std::pair{s, s * (1.0 - s)};
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0}; });
}

Tensor exp(const Tensor& x) {
  return unary(x, [](double v) {
    const double e = std::exp(v);
    return std::pair{e, e};
  });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) throw DomainError("log of non-positive entry " + std::to_string(v));
  }
  return unary(x, [](double v) { return std::pair{std::log(v), 1.0 / v}; });
}

Tensor elementwise(const Tensor& x, Pointwise kind, const Tensor& y) {
  switch (kind) {
    case Pointwise::kSigmoid: return sigmoid(x);
    case Pointwise::kRelu: return relu(x);
    case Pointwise::kExp: return exp(x);
    case Pointwise::kLog: return log(x);
    case Pointwise::kAdd: return add(x, y);
    case Pointwise::kMul: return mul(x, y);
    case Pointwise::kSub: return sub(x, y);
  }
  throw DomainError("unknown pointwise kind");
}

Tensor elementwise(const Tensor& x, Pointwise kind, double y) {
  return elementwise(x, kind, Tensor::scalar(y));
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::kIdentity: return x;
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kRelu: return relu(x);
  }
  return x;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.dim() != 2 || b.dim() != 2 || a.size(1) != b.size(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      const double* brow = bd.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return Tensor::from_op({m, n}, std::move(out), {a, b},
                         [a, b, m, k, n](std::span<const double> g, Grads gi) {
                           const auto ad = a.data();
                           const auto bd = b.data();
                           if (!gi[0].empty()) {  // dA = G Bᵀ
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 double acc = 0.0;
                                 for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bd[p * n + j];
                                 gi[0][i * k + p] += acc;
                               }
                           }
                           if (!gi[1].empty()) {  // dB = Aᵀ G
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 const double av = ad[i * k + p];
                                 if (av == 0.0) continue;
                                 for (std::size_t j = 0; j < n; ++j) gi[1][p * n + j] += av * g[i * n + j];
                               }
                           }
                         });
}

Tensor transpose(const Tensor& a) {
  if (a.dim() != 2) throw DimensionError("transpose expects a matrix");
  const std::size_t m = a.size(0), n = a.size(1);
  const auto ad = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  return Tensor::from_op({n, m}, std::move(out), {a}, [m, n](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) gi[0][i * n + j] += g[j * m + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b) {
  if (x.dim() == 0 || w.dim() != 2 || x.shape().back() != w.size(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  const bool has_bias = b.has_value() && b->numel() > 0;
  if (has_bias && (b->dim() != 1 || b->size(0) != w.size(1))) {
    throw DimensionError("linear: bias " + shape_str(b->shape()) + " incompatible with weight " +
                         shape_str(w.shape()));
  }
  const std::size_t din = w.size(0), dout = w.size(1);
  const std::size_t rows = x.numel() / din;
  Shape out_shape = x.shape();
  out_shape.back() = dout;
  const auto xd = x.data();
  const auto wd = w.data();
  std::vector<double> out(rows * dout, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* orow = out.data() + r * dout;
    if (has_bias) std::copy(b->data().begin(), b->data().end(), orow);
    for (std::size_t i = 0; i < din; ++i) {
      const double xv = xd[r * din + i];
      if (xv == 0.0) continue;
      const double* wrow = wd.data() + i * dout;
      for (std::size_t j = 0; j < dout; ++j) orow[j] += xv * wrow[j];
    }
  }
  std::vector<Tensor> inputs{x, w};
  if (has_bias) inputs.push_back(*b);
  return Tensor::from_op(
      std::move(out_shape), std::move(out), std::move(inputs),
      [x, w, rows, din, dout, has_bias](std::span<const double> g, Grads gi) {
        const auto xd = x.data();
        const auto wd = w.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* grow = g.data() + r * dout;
          if (!gi[0].empty()) {
            for (std::size_t i = 0; i < din; ++i) {
              double acc = 0.0;
              const double* wrow = wd.data() + i * dout;
              for (std::size_t j = 0; j < dout; ++j) acc += grow[j] * wrow[j];
              gi[0][r * din + i] += acc;
            }
          }
          if (!gi[1].empty()) {
            for (std::size_t i = 0; i < din; ++i) {
              const double xv = xd[r * din + i];
              if (xv == 0.0) continue;
              double* gw = gi[1].data() + i * dout;
              for (std::size_t j = 0; j < dout; ++j) gw[j] += xv * grow[j];
            }
          }
          if (has_bias && !gi[2].empty()) {
            for (std::size_t j = 0; j < dout; ++j) gi[2][j] += grow[j];
          }
        }
      });
}

Tensor sum(const Tensor& x) {
  const auto xd = x.data();
  const double s = std::accumulate(xd.begin(), xd.end(), 0.0);
  return Tensor::from_op({}, {s}, {x}, [](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (double& v : gi[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean_rows(const Tensor& x) {
  if (x.dim() != 2) throw DimensionError("mean_rows expects a matrix");
  const std::size_t n = x.size(0), d = x.size(1);
  if (n == 0) throw DimensionError("mean_rows over zero rows");
  const auto xd = x.data();
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += xd[i * d + j];
  const double inv = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= inv;
  return Tensor::from_op({d}, std::move(out), {x}, [n, d, inv](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) gi[0][i * d + j] += g[j] * inv;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  return Tensor::from_op(std::move(shape), std::move(out), {x},
                         [](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                         });
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Shape base = parts[0].shape();
  if (base.empty()) throw DimensionError("concat_last of scalars");
  const std::size_t rows = shape_numel(base) / std::max<std::size_t>(base.back(), 1);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    Shape s = p.shape();
    if (s.size() != base.size() ||
        !std::equal(s.begin(), s.end() - 1, base.begin(), base.end() - 1)) {
      throw DimensionError("concat_last: mismatched shapes " + shape_str(base) + " and " +
                           shape_str(s));
    }
    widths.push_back(s.back());
    total += s.back();
  }
  Shape out_shape = base;
  out_shape.back() = total;
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * total + offset + c] = pd[r * widths[k] + c];
    offset += widths[k];
  }
  return Tensor::from_op(std::move(out_shape), std::move(out), parts,
                         [widths, rows, total](std::span<const double> g, Grads gi) {
                           std::size_t offset = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                             if (!gi[k].empty()) {
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t c = 0; c < widths[k]; ++c)
                                   gi[k][r * widths[k] + c] += g[r * total + offset + c];
                             }
                             offset += widths[k];
                           }
                         });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Shape base = parts[0].shape();
  if (base.empty()) throw DimensionError("concat_rows of scalars");
  std::size_t rows = 0;
  std::vector<std::size_t> sizes;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != base.size() || !std::equal(s.begin() + 1, s.end(), base.begin() + 1)) {
      throw DimensionError("concat_rows: mismatched shapes " + shape_str(base) + " and " +
                           shape_str(s));
    }
    rows += s[0];
    sizes.push_back(p.numel());
  }
  Shape out_shape = base;
  out_shape[0] = rows;
  std::vector<double> out;
  out.reserve(shape_numel(out_shape));
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::from_op(std::move(out_shape), std::move(out), parts,
                         [sizes](std::span<const double> g, Grads gi) {
                           std::size_t offset = 0;
                           for (std::size_t k = 0; k < sizes.size(); ++k) {
                             if (!gi[k].empty())
                               for (std::size_t i = 0; i < sizes[k]; ++i) gi[k][i] += g[offset + i];
                             offset += sizes[k];
                           }
                         });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  if (x.dim() == 0) throw DimensionError("gather_rows on a scalar");
  const std::size_t n = x.size(0);
  const std::size_t stride = n ? x.numel() / n : 0;
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  for (std::size_t r : idx) {
    if (r >= n) throw DimensionError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  Shape out_shape = x.shape();
  out_shape[0] = idx.size();
  std::vector<double> out(idx.size() * stride);
  const auto xd = x.data();
  for (std::size_t k = 0; k < idx.size(); ++k)
    std::copy_n(xd.begin() + idx[k] * stride, stride, out.begin() + k * stride);
  return Tensor::from_op(std::move(out_shape), std::move(out), {x},
                         [idx, stride](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t k = 0; k < idx.size(); ++k)
                             for (std::size_t j = 0; j < stride; ++j)
                               gi[0][idx[k] * stride + j] += g[k * stride + j];
                         });
}

Tensor pad_rows(const Tensor& x, std::size_t rows) {
  if (x.dim() == 0 || x.size(0) > rows) throw DimensionError("pad_rows: cannot shrink");
  const std::size_t keep = x.numel();
  Shape out_shape = x.shape();
  out_shape[0] = rows;
  std::vector<double> out(shape_numel(out_shape), 0.0);
  std::copy(x.data().begin(), x.data().end(), out.begin());
  return Tensor::from_op(std::move(out_shape), std::move(out), {x},
                         [keep](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t i = 0; i < keep; ++i) gi[0][i] += g[i];
                         });
}

Tensor top_left(const Tensor& x, std::size_t rows, std::size_t cols) {
  if (x.dim() != 2 || rows > x.size(0) || cols > x.size(1)) {
    throw DimensionError("top_left: block exceeds matrix " + shape_str(x.shape()));
  }
  const std::size_t n = x.size(1);
  std::vector<double> out(rows * cols);
  const auto xd = x.data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = xd[i * n + j];
  return Tensor::from_op({rows, cols}, std::move(out), {x},
                         [rows, cols, n](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t i = 0; i < rows; ++i)
                             for (std::size_t j = 0; j < cols; ++j) gi[0][i * n + j] += g[i * cols + j];
                         });
}

Tensor symmetrize(const Tensor& m) {
  if (m.dim() != 2 || m.size(0) != m.size(1)) throw DimensionError("symmetrize expects a square matrix");
  const std::size_t n = m.size(0);
  const auto md = m.data();
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = 0.5 * (md[i * n + j] + md[j * n + i]);
  return Tensor::from_op({n, n}, std::move(out), {m}, [n](std::span<const double> g, Grads gi) {
    if (gi[0].empty()) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) gi[0][i * n + j] += 0.5 * (g[i * n + j] + g[j * n + i]);
  });
}

Tensor softmax_rows(const Tensor& x) {
  if (x.dim() != 2) throw DimensionError("softmax_rows expects a matrix");
  const std::size_t n = x.size(0), k = x.size(1);
  const auto xd = x.data();
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, xd[i * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      out[i * k + j] = std::exp(xd[i * k + j] - mx);
      z += out[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= z;
  }
  std::vector<double> probs = out;
  return Tensor::from_op({n, k}, std::move(out), {x},
                         [probs = std::move(probs), n, k](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t i = 0; i < n; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < k; ++j) dot += g[i * k + j] * probs[i * k + j];
                             for (std::size_t j = 0; j < k; ++j)
                               gi[0][i * k + j] += probs[i * k + j] * (g[i * k + j] - dot);
                           }
                         });
}

Tensor straight_through(const Tensor& hard, const Tensor& soft) {
  if (hard.shape() != soft.shape()) throw DimensionError("straight_through: shape mismatch");
  std::vector<double> out(hard.data().begin(), hard.data().end());
  return Tensor::from_op(hard.shape(), std::move(out), {soft},
                         [](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                         });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets, const std::optional<Tensor>& mask) {
  if (logits.shape() != targets.shape() || (mask && mask->shape() != logits.shape())) {
    throw DimensionError("bce_with_logits: shape mismatch");
  }
  const auto xd = logits.data();
  const auto td = targets.data();
  std::vector<double> weights(xd.size(), 1.0);
  if (mask) std::copy(mask->data().begin(), mask->data().end(), weights.begin());
  double total = 0.0;
  for (std::size_t i = 0; i < xd.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const double x = xd[i];
    // max(x, 0) - x t + log(1 + e^{-|x|})
    total += weights[i] * (std::max(x, 0.0) - x * td[i] + std::log1p(std::exp(-std::abs(x))));
  }
  return Tensor::from_op({}, {total}, {logits},
                         [logits, targets, weights = std::move(weights)](std::span<const double> g,
                                                                         Grads gi) {
                           if (gi[0].empty()) return;
                           const auto xd = logits.data();
                           const auto td = targets.data();
                           for (std::size_t i = 0; i < xd.size(); ++i) {
                             if (weights[i] == 0.0) continue;
                             gi[0][i] += g[0] * weights[i] * (stable_sigmoid(xd[i]) - td[i]);
                           }
                         });
}

Tensor tensor_product(const Tensor& a, const Tensor& b) {
  if (a.numel() == 0 || b.numel() == 0) throw DimensionError("tensor_product of an empty tensor");
  Shape shape = a.shape();
  shape.insert(shape.end(), b.shape().begin(), b.shape().end());
  const std::size_t na = a.numel(), nb = b.numel();
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(na * nb);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j) out[i * nb + j] = ad[i] * bd[j];
  return Tensor::from_op(std::move(shape), std::move(out), {a, b},
                         [a, b, na, nb](std::span<const double> g, Grads gi) {
                           const auto ad = a.data();
                           const auto bd = b.data();
                           for (std::size_t i = 0; i < na; ++i)
                             for (std::size_t j = 0; j < nb; ++j) {
                               const double gv = g[i * nb + j];
                               if (!gi[0].empty()) gi[0][i] += gv * bd[j];
                               if (!gi[1].empty()) gi[1][j] += gv * ad[i];
                             }
                         });
}

Tensor contract(const Tensor& a, std::span<const std::size_t> axes_in) {
  const Shape& s = a.shape();
  std::vector<std::size_t> axes(axes_in.begin(), axes_in.end());
  std::sort(axes.begin(), axes.end());
  if (std::adjacent_find(axes.begin(), axes.end()) != axes.end()) {
    throw DimensionError("contract: repeated axis");
  }
  for (std::size_t ax : axes) {
    if (ax >= s.size()) {
      throw DimensionError("contract: axis " + std::to_string(ax) + " out of range for shape " +
                           shape_str(s));
    }
  }
  if (!axes.empty()) {
    for (std::size_t ax : axes) {
      if (s[ax] != s[axes[0]]) throw DimensionError("contract: contracted axes of unequal length");
    }
  }
  std::vector<bool> contracted(s.size(), false);
  for (std::size_t ax : axes) contracted[ax] = true;
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!contracted[i]) out_shape.push_back(s[i]);

  // For every input entry on the diagonal of the contracted axes, record the
  // output slot it feeds. Off-diagonal entries are skipped.
  const std::size_t total = a.numel();
  std::vector<std::size_t> target(total, SIZE_MAX);
  std::vector<std::size_t> index(s.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    bool on_diag = true;
    for (std::size_t k = 1; k < axes.size(); ++k) {
      if (index[axes[k]] != index[axes[0]]) {
        on_diag = false;
        break;
      }
    }
    if (on_diag) {
      std::size_t o = 0;
      for (std::size_t i = 0; i < s.size(); ++i)
        if (!contracted[i]) o = o * s[i] + index[i];
      target[flat] = o;
    }
    for (std::size_t i = s.size(); i-- > 0;) {
      if (++index[i] < s[i]) break;
      index[i] = 0;
    }
  }
  std::vector<double> out(shape_numel(out_shape), 0.0);
  const auto ad = a.data();
  for (std::size_t flat = 0; flat < total; ++flat)
    if (target[flat] != SIZE_MAX) out[target[flat]] += ad[flat];
  return Tensor::from_op(std::move(out_shape), std::move(out), {a},
                         [target = std::move(target)](std::span<const double> g, Grads gi) {
                           if (gi[0].empty()) return;
                           for (std::size_t flat = 0; flat < target.size(); ++flat)
                             if (target[flat] != SIZE_MAX) gi[0][flat] += g[target[flat]];
                         });
}

Tensor contract(const Tensor& a, std::initializer_list<std::size_t> axes) {
  std::vector<std::size_t> v(axes);
  return contract(a, std::span<const std::size_t>(v));
}

Tensor permute_node_axes(const Tensor& x, std::span<const std::size_t> sigma, std::size_t node_axes) {
  const Shape& s = x.shape();
  const std::size_t n = sigma.size();
  if (node_axes > s.size()) throw DimensionError("permute_node_axes: too many node axes");
  for (std::size_t k = 0; k < node_axes; ++k) {
    if (s[k] != n) throw DimensionError("permute_node_axes: node axis length mismatch");
  }
  std::size_t inner = 1;
  for (std::size_t k = node_axes; k < s.size(); ++k) inner *= s[k];
  std::size_t outer = 1;
  for (std::size_t k = 0; k < node_axes; ++k) outer *= n;
  std::vector<double> out(x.numel());
  const auto xd = x.data();
  std::vector<std::size_t> idx(node_axes, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t dst = 0;
    for (std::size_t k = 0; k < node_axes; ++k) dst = dst * n + sigma[idx[k]];
    std::copy_n(xd.begin() + o * inner, inner, out.begin() + dst * inner);
    for (std::size_t k = node_axes; k-- > 0;) {
      if (++idx[k] < n) break;
      idx[k] = 0;
    }
  }
  return Tensor(s, std::move(out));
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace mgvae
