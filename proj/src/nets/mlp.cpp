#include "nets/mlp.hpp"

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace gada::nets {

const char* head_name(Head head) noexcept {
  switch (head) {
    case Head::linear: return "linear";
    case Head::sigmoid: return "sigmoid";
    case Head::tanh: return "tanh";
    case Head::none: return "none";
  }
  return "?";
}

Head parse_head(std::string_view name) {
  if (name == "linear") return Head::linear;
  if (name == "sigmoid") return Head::sigmoid;
  if (name == "tanh") return Head::tanh;
  if (name == "none") return Head::none;
  throw ConfigError("unknown output head '" + std::string(name) + "'");
}

void NetSpec::validate(std::string_view what) const {
  if (widths.size() < 2) {
    throw ContractError(std::string(what) + ": network needs at least one layer");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ContractError(std::string(what) + ": layer widths must be positive");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw ContractError(std::string(what) + ": leaky_relu alpha must lie in [0, 1)");
  }
}

void init_mlp(const NetSpec& spec, std::string_view prefix, std::uint64_t seed,
              ad::ParamStore& store) {
  spec.validate(prefix);
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> w(fan_in * fan_out);
    for (double& v : w) v = rng.normal(0.0, stddev);
    const std::string base(prefix);
    store.add(base + "/W" + std::to_string(l), ad::Tensor::matrix(fan_in, fan_out, std::move(w)));
    store.add(base + "/b" + std::to_string(l), ad::Tensor::zeros({fan_out}));
  }
}

MlpOutput forward_mlp(const NetSpec& spec, const ad::Bound& params, std::size_t offset, ad::Var x) {
  if (params.size() < offset + 2 * spec.layers()) {
    throw ContractError("forward_mlp: not enough bound parameters");
  }
  if (x.value().cols() != spec.input_width()) {
    throw DimensionError("network expects input width " + std::to_string(spec.input_width()) +
                         ", got shape " + ad::shape_string(x.shape()));
  }
  MlpOutput out;
  ad::Var h = x;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    h = ad::affine(h, params[offset + 2 * l], params[offset + 2 * l + 1]);
    const bool last = l + 1 == spec.layers();
    if (!last) {
      h = ad::leaky_relu(h, spec.alpha);
      out.hidden.push_back(h);
      continue;
    }
    switch (spec.head) {
      case Head::linear: break;
      case Head::sigmoid: h = ad::sigmoid(h); break;
      case Head::tanh: h = ad::tanh(h); break;
      case Head::none: h = ad::leaky_relu(h, spec.alpha); break;
    }
  }
  out.output = h;
  return out;
}

}  // namespace gada::nets
