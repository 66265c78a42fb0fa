#include "a3ps/nn/adam.hpp"

#include <cmath>

#include "a3ps/errors.hpp"

namespace a3ps::nn {

AdamState::AdamState(std::span<Parameter* const> params, AdamConfig cfg) : config(cfg) {
  for (const Parameter* p : params) {
    first_moment.emplace_back(p->value.shape(), 0.0);
    second_moment.emplace_back(p->value.shape(), 0.0);
  }
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (params.size() != state.first_moment.size()) {
    throw ContractError("adam_step: state built for " + std::to_string(state.first_moment.size()) +
                        " parameters, given " + std::to_string(params.size()));
  }
  for (const Parameter* p : params) {
    if (!p->has_grad) throw ContractError("adam_step: parameter '" + p->name + "' has no gradient");
    if (!p->grad.same_shape(p->value)) throw ShapeError("adam_step: gradient shape mismatch for " + p->name);
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
    p.zero_grad();
  }
}

void zero_grad(std::span<Parameter* const> params) {
  for (const Parameter* p : params) p->zero_grad();
}

}  // namespace a3ps::nn
