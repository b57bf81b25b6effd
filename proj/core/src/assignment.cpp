#include "mgvae/assignment.hpp"

#include "mgvae/error.hpp"

namespace mgvae {

ClusterAssignment::ClusterAssignment(std::vector<std::size_t> labels, std::size_t k)
    : labels_(std::move(labels)), k_(k) {
  for (std::size_t l : labels_) {
    if (l >= k_) {
      throw DomainError("cluster label " + std::to_string(l) + " >= K = " + std::to_string(k_));
    }
  }
}

ClusterAssignment ClusterAssignment::from_matrix(const Tensor& pi) {
  if (pi.dim() != 2) throw DimensionError("assignment matrix must be (n, K)");
  const std::size_t n = pi.size(0), k = pi.size(1);
  std::vector<std::size_t> labels(n);
  const auto d = pi.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = d[i * k + j];
      if (v == 1.0) {
        ++ones;
        labels[i] = j;
      } else if (v != 0.0) {
        ones = 2;
        break;
      }
    }
    if (ones != 1) throw DomainError("assignment row " + std::to_string(i) + " is not one-hot");
  }
  return ClusterAssignment(std::move(labels), k);
}

std::vector<std::size_t> ClusterAssignment::sizes() const {
  std::vector<std::size_t> s(k_, 0);
  for (std::size_t l : labels_) ++s[l];
  return s;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::members() const {
  std::vector<std::vector<std::size_t>> m(k_);
  for (std::size_t i = 0; i < labels_.size(); ++i) m[labels_[i]].push_back(i);
  return m;
}

Tensor ClusterAssignment::matrix() const {
  Tensor t = Tensor::zeros({labels_.size(), k_});
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < labels_.size(); ++i) d[i * k_ + labels_[i]] = 1.0;
  return t;
}

ClusterAssignment ClusterAssignment::compacted() const {
  const auto s = sizes();
  std::vector<std::size_t> remap(k_, 0);
  std::size_t next = 0;
  for (std::size_t c = 0; c < k_; ++c)
    if (s[c] > 0) remap[c] = next++;
  std::vector<std::size_t> labels(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) labels[i] = remap[labels_[i]];
  return ClusterAssignment(std::move(labels), next);
}

ClusterAssignment ClusterAssignment::permuted(const std::vector<std::size_t>& sigma) const {
  if (sigma.size() != labels_.size()) throw DimensionError("permutation length mismatch");
  std::vector<std::size_t> labels(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) labels[sigma[i]] = labels_[i];
  return ClusterAssignment(std::move(labels), k_);
}

}  // namespace mgvae
