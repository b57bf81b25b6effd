#pragma once

#include <cstddef>
#include <vector>

#include "mgvae/tensor.hpp"

namespace mgvae {

// Hard partition of n nodes into K clusters. Empty clusters are allowed.
class ClusterAssignment {
 public:
  ClusterAssignment() = default;
  // Throws DomainError if a label is >= k.
  ClusterAssignment(std::vector<std::size_t> labels, std::size_t k);

  // Accepts an (n, K) zero-one matrix; throws DomainError when a row is not
  // one-hot.
  static ClusterAssignment from_matrix(const Tensor& pi);

  std::size_t num_nodes() const { return labels_.size(); }
  std::size_t num_clusters() const { return k_; }
  std::size_t operator[](std::size_t node) const { return labels_[node]; }
  const std::vector<std::size_t>& labels() const { return labels_; }

  std::vector<std::size_t> sizes() const;
  // Node ids of each cluster in ascending order.
  std::vector<std::vector<std::size_t>> members() const;
  // (n, K) one-hot matrix Π with Π[i, π(i)] = 1.
  Tensor matrix() const;

  // Relabels clusters so that only non-empty ones remain, preserving the
  // relative order of cluster ids.
  ClusterAssignment compacted() const;

  // σ·π: node σ(i) receives the label of node i.
  ClusterAssignment permuted(const std::vector<std::size_t>& sigma) const;

  bool operator==(const ClusterAssignment&) const = default;

 private:
  std::vector<std::size_t> labels_;
  std::size_t k_ = 0;
};

}  // namespace mgvae
