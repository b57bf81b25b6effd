#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mgvae {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl;

// Receives dLoss/dOutput and accumulates into the gradient buffers of the
// node's inputs. `grad_inputs[i]` is empty when input i is not tracked.
using BackwardFn = std::function<void(std::span<const double> grad_output,
                                      std::span<const std::span<double>> grad_inputs)>;

struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  BackwardFn backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated lazily, only for tracked leaves
  bool requires_grad = false;
  std::shared_ptr<Node> grad_fn;  // null for leaves
};

}  // namespace detail

class Tensor;

// Disables tape recording in the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Dense row-major float64 tensor with reverse-mode autodiff.
//
// A Tensor is a shared handle: copies alias the same storage, like a
// reference-counted array. Values are immutable once produced by an op; only
// leaves (parameters) are updated in place, by the optimizer or by finite
// difference probes.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values);
  // Row-major nested initializer for small literal matrices.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor eye(std::size_t n);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;
  bool is_scalar() const { return numel() == 1; }

  std::span<const double> data() const;
  // Mutable access; only meaningful for leaves (parameters, constants).
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Copy of the values, cut from the tape.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  // Runs reverse-mode differentiation from this scalar. Gradients accumulate
  // into tracked leaves. Returns false when the scalar is not connected to any
  // tracked leaf, in which case no gradient is written.
  bool backward() const;

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

  // Builds an op result, recording `backward` on the tape when any input is
  // tracked and grad mode is on.
  static Tensor from_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                        detail::BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::TensorImpl> impl_;
};

}  // namespace mgvae
