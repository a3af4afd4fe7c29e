#ifndef GADA_NETS_ADAM_HPP
#define GADA_NETS_ADAM_HPP

#include <cstdint>

#include "autodiff/param_store.hpp"

namespace gada::nets {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  AdamConfig config;
  ad::ParamStore first_moment;
  ad::ParamStore second_moment;
  std::uint64_t step = 0;

  static AdamState create(const ad::ParamStore& params, AdamConfig config);
  bool operator==(const AdamState&) const = default;
};

// One bias-corrected Adam update. `grads` must carry every parameter name.
void adam_step(ad::ParamStore& params, const ad::ParamStore& grads, AdamState& state);

}  // namespace gada::nets

#endif  // GADA_NETS_ADAM_HPP
