#ifndef GADA_NETS_MLP_HPP
#define GADA_NETS_MLP_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/param_store.hpp"
#include "autodiff/tape.hpp"

namespace gada::nets {

// Activation applied after the final affine layer. `none` keeps the hidden
// activation on the last layer too (used by the feature extractor).
enum class Head { linear, sigmoid, tanh, none };

const char* head_name(Head head) noexcept;
Head parse_head(std::string_view name);

struct NetSpec {
  // widths[0] is the input width; each consecutive pair is one affine layer.
  std::vector<std::size_t> widths;
  double alpha = 0.1;
  Head head = Head::linear;

  std::size_t layers() const noexcept { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  void validate(std::string_view what = "network") const;

  bool operator==(const NetSpec&) const = default;
};

// Adds "<prefix>/W<i>" and "<prefix>/b<i>" for every layer. Weights are
// N(0, 2/fan_in), biases zero.
void init_mlp(const NetSpec& spec, std::string_view prefix, std::uint64_t seed,
              ad::ParamStore& store);

struct MlpOutput {
  ad::Var output;
  // Post-activation output of every hidden layer, in order.
  std::vector<ad::Var> hidden;
};

// `params` holds 2*layers() vars (W0, b0, W1, b1, ...) starting at `offset`.
MlpOutput forward_mlp(const NetSpec& spec, const ad::Bound& params, std::size_t offset, ad::Var x);

}  // namespace gada::nets

#endif  // GADA_NETS_MLP_HPP
