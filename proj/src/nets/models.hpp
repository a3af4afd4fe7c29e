#ifndef GADA_NETS_MODELS_HPP
#define GADA_NETS_MODELS_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "autodiff/param_store.hpp"
#include "autodiff/tape.hpp"
#include "nets/mlp.hpp"

namespace gada::nets {

// Floor/ceiling applied to every probability before it is logged.
inline constexpr double kProbClamp = 1e-7;

// Which activation the discriminator reads, and which one feature matching
// compares.
enum class DiscTap { features, logits };
enum class PhiTap { last_hidden, features };

const char* disc_tap_name(DiscTap tap) noexcept;
DiscTap parse_disc_tap(std::string_view name);
const char* phi_tap_name(PhiTap tap) noexcept;
PhiTap parse_phi_tap(std::string_view name);

// f = h o g with K+1 outputs; the last one is the fictitious class.
struct ClassifierModel {
  NetSpec g_spec;
  NetSpec h_spec;
  std::size_t num_classes = 0;  // K
  PhiTap phi_tap = PhiTap::last_hidden;
  ad::ParamStore params;        // "g/..." then "h/..."

  static ClassifierModel create(NetSpec g_spec, NetSpec h_spec, std::size_t num_classes,
                                std::uint64_t seed, PhiTap phi_tap = PhiTap::last_hidden);

  std::size_t input_dim() const { return g_spec.input_width(); }
  std::size_t feature_dim() const { return g_spec.output_width(); }
  std::size_t phi_dim() const;
  void validate() const;
  bool operator==(const ClassifierModel&) const = default;
};

struct ClassifierOutput {
  ad::Var logits;    // [B x (K+1)], pre-softmax
  ad::Var features;  // g(x)
  ad::Var phi;       // feature-matching tap
};

ClassifierOutput forward_classifier(const ClassifierModel& model, const ad::Bound& params, ad::Var x);

struct ClassifierValues {
  ad::Tensor logits;
  ad::Tensor features;
  ad::Tensor phi;
};
ClassifierValues forward_classifier(const ClassifierModel& model, const ad::Tensor& x);

// Binary-output domain discriminator, sigmoid head.
struct DiscriminatorModel {
  NetSpec spec;
  DiscTap tap = DiscTap::features;
  ad::ParamStore params;  // "D/..."

  static DiscriminatorModel create(NetSpec spec, DiscTap tap, std::uint64_t seed);
  void validate() const;
  bool operator==(const DiscriminatorModel&) const = default;
};

// Sigmoid output clamped to [kProbClamp, 1 - kProbClamp], shape [B x 1].
ad::Var forward_discriminator(const DiscriminatorModel& model, const ad::Bound& params, ad::Var input);
ad::Tensor forward_discriminator(const DiscriminatorModel& model, const ad::Tensor& input);

// The discriminator input selected by its tap.
ad::Var disc_input(const DiscriminatorModel& disc, const ClassifierOutput& out);

// Out-of-class sample generator with tanh head; noise is standard normal.
struct GeneratorModel {
  NetSpec spec;
  ad::ParamStore params;  // "G/..."

  static GeneratorModel create(NetSpec spec, std::uint64_t seed);
  std::size_t noise_dim() const { return spec.input_width(); }
  std::size_t output_dim() const { return spec.output_width(); }
  void validate() const;
  bool operator==(const GeneratorModel&) const = default;
};

ad::Var forward_generator(const GeneratorModel& model, const ad::Bound& params, ad::Var z);
ad::Tensor forward_generator(const GeneratorModel& model, const ad::Tensor& z);

}  // namespace gada::nets

#endif  // GADA_NETS_MODELS_HPP
