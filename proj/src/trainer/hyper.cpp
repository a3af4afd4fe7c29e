#include "trainer/hyper.hpp"

#include <functional>
#include <map>

#include "common/error.hpp"
#include "common/text.hpp"

namespace gada::train {

void HyperParams::validate() const {
  weights.validate();
  vat.validate();
  if (batch < 2) throw ContractError("batch size M must be >= 2");
  for (double lr : {lr_cls, lr_disc, lr_gen}) {
    if (!(lr >= 0.0)) throw ContractError("learning rates must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ContractError("Adam epsilon must be positive");
  if (eval_interval == 0) throw ContractError("eval_interval must be positive");
  if (dirt_refresh_interval == 0) throw ContractError("dirt_refresh_interval must be positive");
  if (!(dirt_beta >= 0.0)) throw ContractError("dirt_beta must be >= 0");
  if (net.noise_dim == 0) throw ContractError("noise dimension must be positive");
}

namespace {

std::string b(bool v) { return v ? "true" : "false"; }

}  // namespace

KeyValues to_key_values(const HyperParams& hp) {
  return {
      {"hyper.lambda_d", format_double(hp.weights.lambda_d)},
      {"hyper.lambda_s", format_double(hp.weights.lambda_s)},
      {"hyper.lambda_t", format_double(hp.weights.lambda_t)},
      {"hyper.lambda_u", format_double(hp.weights.lambda_u)},
      {"hyper.lr_cls", format_double(hp.lr_cls)},
      {"hyper.lr_disc", format_double(hp.lr_disc)},
      {"hyper.lr_gen", format_double(hp.lr_gen)},
      {"hyper.adam_beta1", format_double(hp.adam_beta1)},
      {"hyper.adam_beta2", format_double(hp.adam_beta2)},
      {"hyper.adam_eps", format_double(hp.adam_eps)},
      {"hyper.batch", std::to_string(hp.batch)},
      {"hyper.steps", std::to_string(hp.steps)},
      {"hyper.eval_interval", std::to_string(hp.eval_interval)},
      {"hyper.vat_epsilon", format_double(hp.vat.epsilon)},
      {"hyper.vat_xi", format_double(hp.vat.xi)},
      {"hyper.vat_iterations", std::to_string(hp.vat.power_iterations)},
      {"hyper.dirt_beta", format_double(hp.dirt_beta)},
      {"hyper.dirt_steps", std::to_string(hp.dirt_steps)},
      {"hyper.dirt_refresh_interval", std::to_string(hp.dirt_refresh_interval)},
      {"hyper.seed", std::to_string(hp.seed)},
      {"hyper.instance_norm", b(hp.instance_norm)},
      {"hyper.use_domain", b(hp.toggles.domain)},
      {"hyper.use_entropy", b(hp.toggles.entropy)},
      {"hyper.use_vat", b(hp.toggles.vat)},
      {"hyper.use_unsupervised", b(hp.toggles.unsupervised)},
      {"net.g_hidden", join(hp.net.g_hidden)},
      {"net.h_hidden", join(hp.net.h_hidden)},
      {"net.d_hidden", join(hp.net.d_hidden)},
      {"net.gen_hidden", join(hp.net.gen_hidden)},
      {"net.alpha", format_double(hp.net.alpha)},
      {"net.noise_dim", std::to_string(hp.net.noise_dim)},
      {"net.disc_tap", nets::disc_tap_name(hp.net.disc_tap)},
      {"net.phi_tap", nets::phi_tap_name(hp.net.phi_tap)},
  };
}

bool apply_key_value(HyperParams& hp, const std::string& key, const std::string& value) {
  using Setter = std::function<void(HyperParams&, const std::string&, const std::string&)>;
  auto dbl = [](double HyperParams::*field) -> Setter {
    return [field](HyperParams& h, const std::string& k, const std::string& v) {
      h.*field = parse_double(v, k);
    };
  };
  auto size = [](std::size_t HyperParams::*field) -> Setter {
    return [field](HyperParams& h, const std::string& k, const std::string& v) {
      h.*field = static_cast<std::size_t>(parse_u64(v, k));
    };
  };
  static const std::map<std::string, Setter> setters = {
      {"hyper.lambda_d", [](HyperParams& h, auto& k, auto& v) { h.weights.lambda_d = parse_double(v, k); }},
      {"hyper.lambda_s", [](HyperParams& h, auto& k, auto& v) { h.weights.lambda_s = parse_double(v, k); }},
      {"hyper.lambda_t", [](HyperParams& h, auto& k, auto& v) { h.weights.lambda_t = parse_double(v, k); }},
      {"hyper.lambda_u", [](HyperParams& h, auto& k, auto& v) { h.weights.lambda_u = parse_double(v, k); }},
      {"hyper.lr_cls", dbl(&HyperParams::lr_cls)},
      {"hyper.lr_disc", dbl(&HyperParams::lr_disc)},
      {"hyper.lr_gen", dbl(&HyperParams::lr_gen)},
      {"hyper.lr", [](HyperParams& h, auto& k, auto& v) {
         h.lr_cls = h.lr_disc = h.lr_gen = parse_double(v, k);
       }},
      {"hyper.adam_beta1", dbl(&HyperParams::adam_beta1)},
      {"hyper.adam_beta2", dbl(&HyperParams::adam_beta2)},
      {"hyper.adam_eps", dbl(&HyperParams::adam_eps)},
      {"hyper.batch", size(&HyperParams::batch)},
      {"hyper.steps", size(&HyperParams::steps)},
      {"hyper.eval_interval", size(&HyperParams::eval_interval)},
      {"hyper.vat_epsilon", [](HyperParams& h, auto& k, auto& v) { h.vat.epsilon = parse_double(v, k); }},
      {"hyper.vat_xi", [](HyperParams& h, auto& k, auto& v) { h.vat.xi = parse_double(v, k); }},
      {"hyper.vat_iterations", [](HyperParams& h, auto& k, auto& v) {
         h.vat.power_iterations = static_cast<std::size_t>(parse_u64(v, k));
       }},
      {"hyper.dirt_beta", dbl(&HyperParams::dirt_beta)},
      {"hyper.dirt_steps", size(&HyperParams::dirt_steps)},
      {"hyper.dirt_refresh_interval", size(&HyperParams::dirt_refresh_interval)},
      {"hyper.seed", [](HyperParams& h, auto& k, auto& v) { h.seed = parse_u64(v, k); }},
      {"hyper.instance_norm", [](HyperParams& h, auto& k, auto& v) { h.instance_norm = parse_bool(v, k); }},
      {"hyper.use_domain", [](HyperParams& h, auto& k, auto& v) { h.toggles.domain = parse_bool(v, k); }},
      {"hyper.use_entropy", [](HyperParams& h, auto& k, auto& v) { h.toggles.entropy = parse_bool(v, k); }},
      {"hyper.use_vat", [](HyperParams& h, auto& k, auto& v) { h.toggles.vat = parse_bool(v, k); }},
      {"hyper.use_unsupervised",
       [](HyperParams& h, auto& k, auto& v) { h.toggles.unsupervised = parse_bool(v, k); }},
      {"net.g_hidden", [](HyperParams& h, auto& k, auto& v) { h.net.g_hidden = parse_size_list(v, k); }},
      {"net.h_hidden", [](HyperParams& h, auto& k, auto& v) { h.net.h_hidden = parse_size_list(v, k); }},
      {"net.d_hidden", [](HyperParams& h, auto& k, auto& v) { h.net.d_hidden = parse_size_list(v, k); }},
      {"net.gen_hidden", [](HyperParams& h, auto& k, auto& v) { h.net.gen_hidden = parse_size_list(v, k); }},
      {"net.alpha", [](HyperParams& h, auto& k, auto& v) { h.net.alpha = parse_double(v, k); }},
      {"net.noise_dim", [](HyperParams& h, auto& k, auto& v) {
         h.net.noise_dim = static_cast<std::size_t>(parse_u64(v, k));
       }},
      {"net.disc_tap", [](HyperParams& h, auto&, auto& v) { h.net.disc_tap = nets::parse_disc_tap(v); }},
      {"net.phi_tap", [](HyperParams& h, auto&, auto& v) { h.net.phi_tap = nets::parse_phi_tap(v); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) {
    if (key.rfind("hyper.", 0) == 0 || key.rfind("net.", 0) == 0) {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
    return false;
  }
  it->second(hp, key, value);
  return true;
}

namespace {

nets::NetSpec chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                    double alpha, nets::Head head) {
  nets::NetSpec s;
  s.widths.push_back(in);
  s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
  if (out) s.widths.push_back(out);
  s.alpha = alpha;
  s.head = head;
  return s;
}

}  // namespace

nets::NetSpec g_spec(const NetConfig& net, std::size_t input_dim) {
  if (net.g_hidden.empty()) throw ConfigError("net.g_hidden needs at least one width");
  return chain(input_dim, net.g_hidden, 0, net.alpha, nets::Head::none);
}

nets::NetSpec h_spec(const NetConfig& net, std::size_t num_classes) {
  return chain(net.g_hidden.back(), net.h_hidden, num_classes + 1, net.alpha, nets::Head::linear);
}

nets::NetSpec d_spec(const NetConfig& net, std::size_t num_classes) {
  const std::size_t tap = net.disc_tap == nets::DiscTap::features ? net.g_hidden.back() : num_classes + 1;
  return chain(tap, net.d_hidden, 1, net.alpha, nets::Head::sigmoid);
}

nets::NetSpec gen_spec(const NetConfig& net, std::size_t data_dim) {
  return chain(net.noise_dim, net.gen_hidden, data_dim, net.alpha, nets::Head::tanh);
}

}  // namespace gada::train
