#pragma once

#include <vector>

#include "cosim/tensor.hpp"

namespace cosim {

// Per-group learning rates: the convolutional backbone and the small heads
// (cosine scale/shift, classifier) can train at different rates.
struct LearningRates {
  double backbone = 1e-2;
  double head = 1e-2;

  double for_group(Parameter::Group g) const {
    return g == Parameter::Group::backbone ? backbone : head;
  }
};

// SGD with momentum and decoupled-from-nothing classic weight decay:
//   g'  = grad + weight_decay * value
//   buf = momentum * buf + g'
//   value -= lr * buf
inline void sgd_step_one(Parameter& p, const LearningRates& lr, double momentum,
                         double weight_decay) {
  COSIM_CHECK_ARG(p.value.has_grad(), "sgd_step: parameter '", p.name,
                  "' has no gradient; run backward first");
  const double rate = lr.for_group(p.group);
  double* v = p.value.data();
  const double* g = p.value.grad().data();
  double* buf = p.momentum.data();
  const std::size_t n = p.value.values().size();
  for (std::size_t i = 0; i < n; ++i) {
    const double adjusted = g[i] + weight_decay * v[i];
    buf[i] = momentum * buf[i] + adjusted;
    v[i] -= rate * buf[i];
  }
}

inline void sgd_step(std::vector<Parameter>& params, const LearningRates& lr, double momentum,
                     double weight_decay) {
  for (Parameter& p : params) sgd_step_one(p, lr, momentum, weight_decay);
}

inline void sgd_step(const std::vector<Parameter*>& params, const LearningRates& lr,
                     double momentum, double weight_decay) {
  for (Parameter* p : params) sgd_step_one(*p, lr, momentum, weight_decay);
}

inline void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->value.zero_grad();
}

}  // namespace cosim
