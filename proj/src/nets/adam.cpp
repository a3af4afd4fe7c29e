#include "nets/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace gada::nets {

AdamState AdamState::create(const ad::ParamStore& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ad::ParamStore& params, const ad::ParamStore& grads, AdamState& state) {
  if (state.first_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match parameters");
  }
  for (const auto& p : params) {
    if (!grads.contains(p.name)) throw ContractError("adam_step: missing gradient for '" + p.name + "'");
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t e = 0; e < params.size(); ++e) {
    auto& p = params.entry(e);
    const ad::Tensor& g = grads.at(p.name);
    ad::Tensor& m = state.first_moment.entry(e).value;
    ad::Tensor& v = state.second_moment.entry(e).value;
    if (g.size() != p.value.size()) {
      throw DimensionError("adam_step: gradient shape mismatch for '" + p.name + "'");
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

}  // namespace gada::nets
