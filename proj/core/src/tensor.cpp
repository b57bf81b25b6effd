#include "mgvae/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "mgvae/error.hpp"

namespace mgvae {

namespace {
thread_local bool g_grad_mode = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = previous_; }
bool grad_mode_enabled() { return g_grad_mode; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor() : Tensor(Shape{0}, {}) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor(Shape{values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(Shape{r, c}, std::move(data));
}

Tensor Tensor::eye(std::size_t n) {
  Tensor t = zeros({n, n});
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  const Shape& s = shape();
  if (index.size() != s.size()) throw DimensionError("index arity mismatch");
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= s[axis]) throw DimensionError("index out of range");
    flat = flat * s[axis] + i;
    ++axis;
  }
  return impl_->data[flat];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  if (!value) impl_->grad.clear();
  return *this;
}

bool Tensor::is_leaf() const { return impl_->grad_fn == nullptr; }

bool Tensor::has_grad() const { return !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data); }

Tensor Tensor::from_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                       detail::BackwardFn backward) {
  Tensor out(std::move(shape), std::move(data));
  if (!grad_mode_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::Node>();
  node->inputs.reserve(inputs.size());
  for (const Tensor& t : inputs) node->inputs.push_back(t.impl_);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
  return out;
}

bool Tensor::backward() const {
  if (numel() != 1) {
    throw DimensionError("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) return false;

  // Iterative post-order DFS: each tracked node visited exactly once.
  std::vector<detail::TensorImpl*> order;
  std::unordered_map<detail::TensorImpl*, bool> visited;
  std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited[impl_.get()] = true;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto* fn = node->grad_fn.get();
    if (fn && next < fn->inputs.size()) {
      detail::TensorImpl* child = fn->inputs[next++].get();
      if (child->requires_grad && !visited[child]) {
        visited[child] = true;
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  bool reached_leaf = false;
  std::unordered_map<detail::TensorImpl*, std::vector<double>> interior;
  auto buffer_for = [&](detail::TensorImpl* t) -> std::span<double> {
    if (!t->requires_grad) return {};
    if (!t->grad_fn) {
      reached_leaf = true;
      if (t->grad.size() != t->data.size()) t->grad.assign(t->data.size(), 0.0);
      return t->grad;
    }
    auto it = interior.find(t);
    if (it == interior.end()) {
      it = interior.emplace(t, std::vector<double>(t->data.size(), 0.0)).first;
    }
    return it->second;
  };

  if (!impl_->grad_fn) {
    // The loss is itself a tracked leaf.
    buffer_for(impl_.get())[0] += 1.0;
    return true;
  }
  interior.emplace(impl_.get(), std::vector<double>{1.0});

  std::vector<std::span<double>> grads;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (!node->grad_fn) continue;
    auto found = interior.find(node);
    if (found == interior.end()) continue;
    const std::vector<double> grad_out = std::move(found->second);
    interior.erase(found);
    const auto& fn = *node->grad_fn;
    grads.clear();
    for (const auto& in : fn.inputs) grads.push_back(buffer_for(in.get()));
    fn.backward(grad_out, grads);
  }
  return reached_leaf;
}

}  // namespace mgvae
