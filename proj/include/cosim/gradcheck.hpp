#pragma once

#include <functional>
#include <vector>

#include "cosim/tensor.hpp"

namespace cosim {

// A scalar-valued function of several tensors, rebuilt from scratch on every
// call so it can be evaluated at perturbed inputs.
using ScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Analytic gradients of fn at the given inputs, one flat vector per input.
inline std::vector<std::vector<double>> analytic_gradients(const ScalarFn& fn,
                                                           const std::vector<Tensor>& inputs) {
  std::vector<Tensor> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(t.clone_detached(/*requires_grad=*/true));
  Tensor out = fn(vars);
  COSIM_CHECK_ARG(out.numel() == 1, "analytic_gradients: fn must return a scalar, shape is ",
                  shape_str(out.shape()));
  backward(out);
  std::vector<std::vector<double>> grads;
  grads.reserve(vars.size());
  for (Tensor& v : vars)
    grads.push_back(v.has_grad() ? v.grad() : std::vector<double>(v.values().size(), 0.0));
  return grads;
}

// Central finite differences, coordinate by coordinate.
inline std::vector<std::vector<double>> finite_difference_gradients(
    const ScalarFn& fn, const std::vector<Tensor>& inputs, double eps) {
  std::vector<Tensor> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(t.clone_detached());
  {
    Tensor probe = fn(vars);
    COSIM_CHECK_ARG(probe.numel() == 1,
                    "finite_difference_gradients: fn must return a scalar, shape is ",
                    shape_str(probe.shape()));
  }
  std::vector<std::vector<double>> grads;
  grads.reserve(vars.size());
  for (std::size_t vi = 0; vi < vars.size(); ++vi) {
    std::vector<double> g(vars[vi].values().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double saved = vars[vi].data()[i];
      vars[vi].data()[i] = saved + eps;
      const double up = fn(vars).item();
      vars[vi].data()[i] = saved - eps;
      const double dn = fn(vars).item();
      vars[vi].data()[i] = saved;
      g[i] = (up - dn) / (2.0 * eps);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

// Max relative disagreement between analytic and central-difference
// gradients: max_i |a_i - c_i| / max(1e-8, |a_i| + |c_i|).
inline double grad_check(const ScalarFn& fn, const std::vector<Tensor>& inputs,
                         double eps = 1e-5) {
  const auto analytic = analytic_gradients(fn, inputs);
  const auto numeric = finite_difference_gradients(fn, inputs, eps);
  double worst = 0.0;
  for (std::size_t vi = 0; vi < analytic.size(); ++vi)
    for (std::size_t i = 0; i < analytic[vi].size(); ++i) {
      const double a = analytic[vi][i];
      const double c = numeric[vi][i];
      const double rel = std::abs(a - c) / std::max(1e-8, std::abs(a) + std::abs(c));
      worst = std::max(worst, rel);
    }
  return worst;
}

}  // namespace cosim
