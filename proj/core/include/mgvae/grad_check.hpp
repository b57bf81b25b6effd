#pragma once

#include <functional>

#include "mgvae/tensor.hpp"

namespace mgvae {

using ScalarFn = std::function<Tensor(const Tensor&)>;

// Max over entries of |analytic - central| / max(|analytic|, |central|, 1e-8),
// where `central` is the central finite difference with step `eps`.
// Throws NumericError when f is non-finite at a perturbed point.
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// Same check for a loss that closes over `param` (a tracked leaf). The
// parameter is perturbed in place and restored; its gradient buffer is reset.
double grad_check_param(const std::function<Tensor()>& loss, Tensor& param, double eps = 1e-5);

}  // namespace mgvae
