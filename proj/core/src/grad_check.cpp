#include "mgvae/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mgvae/error.hpp"

namespace mgvae {

namespace {

double relative_error(double analytic, double central) {
  const double denom = std::max({std::abs(analytic), std::abs(central), 1e-8});
  return std::abs(analytic - central) / denom;
}

double checked_value(const Tensor& t) {
  const double v = t.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  if (!(eps > 0)) throw DomainError("grad_check: eps must be positive");
  Tensor probe = x.detach();
  probe.set_requires_grad(true);
  Tensor y = f(probe);
  checked_value(y);
  y.backward();
  std::vector<double> analytic(probe.numel(), 0.0);
  if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

  double worst = 0.0;
  NoGradGuard no_grad;
  for (std::size_t i = 0; i < probe.numel(); ++i) {
    Tensor plus = x.detach();
    Tensor minus = x.detach();
    plus.mutable_data()[i] += eps;
    minus.mutable_data()[i] -= eps;
    const double central = (checked_value(f(plus)) - checked_value(f(minus))) / (2.0 * eps);
    worst = std::max(worst, relative_error(analytic[i], central));
  }
  return worst;
}

double grad_check_param(const std::function<Tensor()>& loss, Tensor& param, double eps) {
  if (!(eps > 0)) throw DomainError("grad_check: eps must be positive");
  param.zero_grad();
  Tensor y = loss();
  checked_value(y);
  y.backward();
  std::vector<double> analytic(param.numel(), 0.0);
  if (param.has_grad()) std::copy(param.grad().begin(), param.grad().end(), analytic.begin());
  param.zero_grad();

  double worst = 0.0;
  NoGradGuard no_grad;
  auto data = param.mutable_data();
  for (std::size_t i = 0; i < param.numel(); ++i) {
    const double saved = data[i];
    data[i] = saved + eps;
    const double up = checked_value(loss());
    data[i] = saved - eps;
    const double down = checked_value(loss());
    data[i] = saved;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

}  // namespace mgvae
