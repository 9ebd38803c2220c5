#include <cmath>

#include "factoreeg/error.hpp"
#include "factoreeg/trainer.hpp"

namespace factoreeg {

AdamWState make_adamw_state(std::span<const Tensor* const> params) {
  AdamWState s;
  for (const Tensor* p : params) {
    s.m.push_back(Tensor::zeros(p->shape));
    s.v.push_back(Tensor::zeros(p->shape));
  }
  return s;
}

void adamw_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamWState& state,
                double lr, double weight_decay) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adamw_step: parameter, gradient and state counts differ");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].shape != params[k]->shape || state.m[k].shape != params[k]->shape) {
      throw ShapeError("adamw_step: gradient shape " + shape_str(grads[k].shape) +
                       " does not match parameter " + shape_str(params[k]->shape));
    }
    if (!grads[k].all_finite()) throw NumericError("adamw_step: non-finite gradient");
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(state.beta1, t);
  const double bias2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k]->data;
    const auto& g = grads[k].data;
    auto& m = state.m[k].data;
    auto& v = state.v[k].data;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p[i] = p[i] - lr * (m_hat / (std::sqrt(v_hat) + state.eps)) - lr * weight_decay * p[i];
    }
  }
}

}  // namespace factoreeg
