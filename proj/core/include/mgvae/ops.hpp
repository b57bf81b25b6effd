#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mgvae/tensor.hpp"

namespace mgvae {

// ---------------------------------------------------------------------------
// Pointwise arithmetic. Binary ops accept equal shapes, or a one-element
// operand on either side that broadcasts as a scalar.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
// Throws DomainError on any non-positive entry.
Tensor log(const Tensor& x);

enum class Pointwise { kSigmoid, kRelu, kExp, kLog, kAdd, kMul, kSub };

// Dispatching form; `y` is required for the binary kinds and ignored otherwise.
Tensor elementwise(const Tensor& x, Pointwise kind, const Tensor& y = Tensor());
Tensor elementwise(const Tensor& x, Pointwise kind, double y);

enum class Activation { kIdentity, kSigmoid, kRelu };
Tensor activate(const Tensor& x, Activation act);

// ---------------------------------------------------------------------------
// Linear algebra and reductions.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// Y[..., j] = sum_i X[..., i] W[i, j] + b[j].
Tensor linear(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b = std::nullopt);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// Column means of an (n, d) matrix.
Tensor mean_rows(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
// Concatenation along the last axis; all other axes must agree.
Tensor concat_last(const std::vector<Tensor>& parts);
// Concatenation along axis 0.
Tensor concat_rows(const std::vector<Tensor>& parts);
// Rows (axis-0 slabs) picked by index; repeated indices are allowed and their
// gradients accumulate.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows);
// Appends zero rows until axis 0 has `rows` entries.
Tensor pad_rows(const Tensor& x, std::size_t rows);
// Leading (rows, cols) block of a matrix.
Tensor top_left(const Tensor& x, std::size_t rows, std::size_t cols);

// ½ (M + Mᵀ).
Tensor symmetrize(const Tensor& m);

// Row-wise softmax of an (n, k) matrix.
Tensor softmax_rows(const Tensor& x);

// Forward value of `hard`, gradient routed to `soft` unchanged.
Tensor straight_through(const Tensor& hard, const Tensor& soft);

// Sum over entries of the numerically stable binary cross-entropy between
// sigmoid(logits) and targets. Entries with mask 0 are skipped.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets,
                       const std::optional<Tensor>& mask = std::nullopt);

// ---------------------------------------------------------------------------
// Tensor algebra over node axes.

// C[i..., j...] = A[i...] B[j...].
Tensor tensor_product(const Tensor& a, const Tensor& b);

// Contraction along a set of axes that share one length m: those axes are
// identified to a single running index which is summed out
// (A_{i_1..i_a} δ^{i_x1..i_xp}). Surviving axes keep their relative order.
// A single axis reduces to a plain sum over that axis.
Tensor contract(const Tensor& a, std::span<const std::size_t> axes);
Tensor contract(const Tensor& a, std::initializer_list<std::size_t> axes);

// Applies the action of σ to the first `node_axes` axes:
// [σ·X]_{σ(i1),..,σ(ik), rest} = X_{i1,..,ik, rest}. Not recorded on the tape.
Tensor permute_node_axes(const Tensor& x, std::span<const std::size_t> sigma,
                         std::size_t node_axes);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace mgvae
