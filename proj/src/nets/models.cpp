#include "nets/models.hpp"

#include "common/error.hpp"
#include "common/rng.hpp"

namespace gada::nets {

const char* disc_tap_name(DiscTap tap) noexcept {
  return tap == DiscTap::features ? "features" : "logits";
}

DiscTap parse_disc_tap(std::string_view name) {
  if (name == "features") return DiscTap::features;
  if (name == "logits") return DiscTap::logits;
  throw ConfigError("unknown discriminator tap '" + std::string(name) + "'");
}

const char* phi_tap_name(PhiTap tap) noexcept {
  return tap == PhiTap::last_hidden ? "last_hidden" : "features";
}

PhiTap parse_phi_tap(std::string_view name) {
  if (name == "last_hidden") return PhiTap::last_hidden;
  if (name == "features") return PhiTap::features;
  throw ConfigError("unknown feature-matching tap '" + std::string(name) + "'");
}

ClassifierModel ClassifierModel::create(NetSpec g_spec, NetSpec h_spec, std::size_t num_classes,
                                        std::uint64_t seed, PhiTap phi_tap) {
  ClassifierModel m;
  m.g_spec = std::move(g_spec);
  m.h_spec = std::move(h_spec);
  m.num_classes = num_classes;
  m.phi_tap = phi_tap;
  m.validate();
  init_mlp(m.g_spec, "g", derive_seed(seed, 0x67), m.params);
  init_mlp(m.h_spec, "h", derive_seed(seed, 0x68), m.params);
  return m;
}

std::size_t ClassifierModel::phi_dim() const {
  if (phi_tap == PhiTap::features || h_spec.layers() < 2) return feature_dim();
  return h_spec.widths[h_spec.widths.size() - 2];
}

void ClassifierModel::validate() const {
  g_spec.validate("feature extractor");
  h_spec.validate("feature classifier");
  if (num_classes < 2) throw ContractError("classifier needs K >= 2 classes");
  if (h_spec.output_width() != num_classes + 1) {
    throw ContractError("feature classifier must have K+1 = " + std::to_string(num_classes + 1) +
                        " outputs, has " + std::to_string(h_spec.output_width()));
  }
  if (h_spec.input_width() != g_spec.output_width()) {
    throw DimensionError("feature classifier input width " + std::to_string(h_spec.input_width()) +
                         " does not match feature width " + std::to_string(g_spec.output_width()));
  }
  if (h_spec.head != Head::linear) throw ContractError("feature classifier must have a linear head");
}

ClassifierOutput forward_classifier(const ClassifierModel& model, const ad::Bound& params, ad::Var x) {
  const MlpOutput g = forward_mlp(model.g_spec, params, 0, x);
  const MlpOutput h = forward_mlp(model.h_spec, params, 2 * model.g_spec.layers(), g.output);
  ClassifierOutput out;
  out.logits = h.output;
  out.features = g.output;
  out.phi = (model.phi_tap == PhiTap::features || h.hidden.empty()) ? g.output : h.hidden.back();
  return out;
}

ClassifierValues forward_classifier(const ClassifierModel& model, const ad::Tensor& x) {
  ad::Tape tape;
  const ad::Bound p = ad::bind(tape, model.params, false);
  const ClassifierOutput out = forward_classifier(model, p, tape.constant(x));
  return {out.logits.value(), out.features.value(), out.phi.value()};
}

DiscriminatorModel DiscriminatorModel::create(NetSpec spec, DiscTap tap, std::uint64_t seed) {
  DiscriminatorModel m;
  m.spec = std::move(spec);
  m.tap = tap;
  m.validate();
  init_mlp(m.spec, "D", derive_seed(seed, 0x44), m.params);
  return m;
}

void DiscriminatorModel::validate() const {
  spec.validate("domain discriminator");
  if (spec.output_width() != 1 || spec.head != Head::sigmoid) {
    throw ContractError("domain discriminator must end in a single sigmoid unit");
  }
}

ad::Var forward_discriminator(const DiscriminatorModel& model, const ad::Bound& params, ad::Var input) {
  const MlpOutput out = forward_mlp(model.spec, params, 0, input);
  return ad::clamp(out.output, kProbClamp, 1.0 - kProbClamp);
}

ad::Tensor forward_discriminator(const DiscriminatorModel& model, const ad::Tensor& input) {
  ad::Tape tape;
  const ad::Bound p = ad::bind(tape, model.params, false);
  return forward_discriminator(model, p, tape.constant(input)).value();
}

ad::Var disc_input(const DiscriminatorModel& disc, const ClassifierOutput& out) {
  return disc.tap == DiscTap::features ? out.features : out.logits;
}

GeneratorModel GeneratorModel::create(NetSpec spec, std::uint64_t seed) {
  GeneratorModel m;
  m.spec = std::move(spec);
  m.validate();
  init_mlp(m.spec, "G", derive_seed(seed, 0x47), m.params);
  return m;
}

void GeneratorModel::validate() const {
  spec.validate("generator");
  if (spec.head != Head::tanh) throw ContractError("generator must have a tanh head");
}

ad::Var forward_generator(const GeneratorModel& model, const ad::Bound& params, ad::Var z) {
  return forward_mlp(model.spec, params, 0, z).output;
}

ad::Tensor forward_generator(const GeneratorModel& model, const ad::Tensor& z) {
  ad::Tape tape;
  const ad::Bound p = ad::bind(tape, model.params, false);
  return forward_generator(model, p, tape.constant(z)).value();
}

}  // namespace gada::nets
