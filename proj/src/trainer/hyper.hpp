#ifndef GADA_TRAINER_HYPER_HPP
#define GADA_TRAINER_HYPER_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "losses/losses.hpp"
#include "nets/adam.hpp"
#include "nets/models.hpp"

namespace gada::train {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

// Ablation switches. A disabled term is neither evaluated nor drawn for.
struct Toggles {
  bool domain = true;        // L_d in S1 and the S2 discriminator update
  bool entropy = true;       // L_e on target
  bool vat = true;           // L_v on source and target
  bool unsupervised = true;  // L_u in S1 and the S3 generator update

  bool operator==(const Toggles&) const = default;
};

// Hidden widths only; input and output widths follow from the data, K and
// the discriminator tap.
struct NetConfig {
  std::vector<std::size_t> g_hidden{64, 64};
  std::vector<std::size_t> h_hidden{32};
  std::vector<std::size_t> d_hidden{32};
  std::vector<std::size_t> gen_hidden{64, 64};
  double alpha = 0.1;
  std::size_t noise_dim = 16;
  nets::DiscTap disc_tap = nets::DiscTap::features;
  nets::PhiTap phi_tap = nets::PhiTap::last_hidden;

  bool operator==(const NetConfig&) const = default;
};

struct HyperParams {
  losses::LossWeights weights;
  double lr_cls = 2e-4;
  double lr_disc = 2e-4;
  double lr_gen = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 64;
  std::size_t steps = 3000;
  std::size_t eval_interval = 100;
  losses::VatConfig vat;
  double dirt_beta = 1e-2;
  std::size_t dirt_steps = 1000;
  std::size_t dirt_refresh_interval = 50;
  std::uint64_t seed = 1;
  bool instance_norm = false;
  Toggles toggles;
  NetConfig net;

  void validate() const;
  nets::AdamConfig adam(double lr) const { return {lr, adam_beta1, adam_beta2, adam_eps}; }
  bool operator==(const HyperParams&) const = default;
};

// Dotted key/value view ("hyper.lambda_u", "net.g_hidden", ...), in a fixed
// order; values print doubles in shortest round-trip form.
KeyValues to_key_values(const HyperParams& hp);

// Applies one "hyper.*" or "net.*" key. Returns false for keys outside
// those namespaces; throws ConfigError for unknown keys inside them.
bool apply_key_value(HyperParams& hp, const std::string& key, const std::string& value);

nets::NetSpec g_spec(const NetConfig& net, std::size_t input_dim);
nets::NetSpec h_spec(const NetConfig& net, std::size_t num_classes);
nets::NetSpec d_spec(const NetConfig& net, std::size_t num_classes);
nets::NetSpec gen_spec(const NetConfig& net, std::size_t data_dim);

}  // namespace gada::train

#endif  // GADA_TRAINER_HYPER_HPP
