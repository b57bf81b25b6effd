#pragma once

#include <vector>

#include "mgvae/tensor.hpp"

namespace mgvae {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed set of leaf parameters. Moment buffers are owned here;
// parameters are updated in place from their accumulated gradients.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void zero_grad();
  void step();
  long steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamOptions opt_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long t_ = 0;
};

}  // namespace mgvae
