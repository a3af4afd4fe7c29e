#include "bench/config.hpp"

#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/text.hpp"

namespace gada::bench {

const char* variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::source_only: return "source_only";
    case Variant::dann: return "dann";
    case Variant::dann_e: return "dann_e";
    case Variant::dann_v: return "dann_v";
    case Variant::dann_u: return "dann_u";
    case Variant::vada: return "vada";
    case Variant::gada: return "gada";
    case Variant::gada_dirtt: return "gada_dirtt";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : all_variants()) {
    if (name == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> vs = {Variant::source_only, Variant::dann,  Variant::dann_e,
                                          Variant::dann_v,      Variant::dann_u, Variant::vada,
                                          Variant::gada,        Variant::gada_dirtt};
  return vs;
}

VariantTerms variant_terms(Variant v) {
  switch (v) {
    case Variant::source_only: return {false, false, false, false, false};
    case Variant::dann: return {true, false, false, false, false};
    case Variant::dann_e: return {true, true, false, false, false};
    case Variant::dann_v: return {true, false, true, false, false};
    case Variant::dann_u: return {true, false, false, true, false};
    case Variant::vada: return {true, true, true, false, false};
    case Variant::gada: return {true, true, true, true, false};
    case Variant::gada_dirtt: return {true, true, true, true, true};
  }
  return {};
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (train::apply_key_value(hp, key, value)) return;
  auto sz = [&] { return static_cast<std::size_t>(parse_u64(value, key)); };
  if (key == "data.source") {
    if (value == "generated") use_csv = false;
    else if (value == "csv") use_csv = true;
    else throw ConfigError("data.source must be 'generated' or 'csv'");
  } else if (key == "data.family") {
    shift.family = data::parse_family(value);
  } else if (key == "data.angle") {
    shift.angle_deg = parse_double(value, key);
  } else if (key == "data.shift_x") {
    shift.shift_x = parse_double(value, key);
  } else if (key == "data.shift_y") {
    shift.shift_y = parse_double(value, key);
  } else if (key == "data.scale") {
    shift.scale = parse_double(value, key);
  } else if (key == "data.noise") {
    shift.noise_sigma = parse_double(value, key);
  } else if (key == "data.classes") {
    shift.num_classes = sz();
  } else if (key == "data.n_source") {
    shift.n_source = sz();
  } else if (key == "data.n_target") {
    shift.n_target = sz();
  } else if (key == "data.n_test") {
    shift.n_test = sz();
  } else if (key == "data.seed") {
    shift.seed = parse_u64(value, key);
  } else if (key == "data.source_x") {
    csv.source_x = value;
  } else if (key == "data.source_y") {
    csv.source_y = value;
  } else if (key == "data.target_x") {
    csv.target_x = value;
  } else if (key == "data.test_x") {
    csv.test_x = value;
  } else if (key == "data.test_y") {
    csv.test_y = value;
  } else if (key == "experiment.variant") {
    variant = parse_variant(value);
  } else if (key == "experiment.variants") {
    ablation_variants.clear();
    for (const auto& s : split(value, ',')) ablation_variants.push_back(parse_variant(s));
    if (ablation_variants.empty()) throw ConfigError("experiment.variants must not be empty");
  } else if (key == "experiment.seeds") {
    seeds = parse_u64_list(value, key);
    if (seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  } else if (key == "experiment.out") {
    out_dir = value;
  } else if (key == "experiment.export_per_split") {
    export_per_split = sz();
  } else if (key == "experiment.jobs") {
    jobs = std::max<std::size_t>(1, sz());
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
      }
      const std::string key(trim(line.substr(0, eq)));
      const std::string value(trim(line.substr(eq + 1)));
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      try {
        cfg.set(key, value);
      } catch (const ConfigError& e) {
        throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

train::KeyValues echo(const ExperimentConfig& cfg) {
  train::KeyValues kv;
  kv.emplace_back("data.source", cfg.use_csv ? "csv" : "generated");
  if (cfg.use_csv) {
    kv.emplace_back("data.source_x", cfg.csv.source_x.string());
    kv.emplace_back("data.source_y", cfg.csv.source_y.string());
    kv.emplace_back("data.target_x", cfg.csv.target_x.string());
    kv.emplace_back("data.test_x", cfg.csv.test_x.string());
    kv.emplace_back("data.test_y", cfg.csv.test_y.string());
  } else {
    const auto& s = cfg.shift;
    kv.emplace_back("data.family", data::family_name(s.family));
    kv.emplace_back("data.angle", format_double(s.angle_deg));
    kv.emplace_back("data.shift_x", format_double(s.shift_x));
    kv.emplace_back("data.shift_y", format_double(s.shift_y));
    kv.emplace_back("data.scale", format_double(s.scale));
    kv.emplace_back("data.noise", format_double(s.noise_sigma));
    kv.emplace_back("data.classes", std::to_string(s.num_classes));
    kv.emplace_back("data.n_source", std::to_string(s.n_source));
    kv.emplace_back("data.n_target", std::to_string(s.n_target));
    kv.emplace_back("data.n_test", std::to_string(s.n_test));
    kv.emplace_back("data.seed", std::to_string(s.seed));
  }
  for (auto& p : train::to_key_values(cfg.hp)) kv.push_back(std::move(p));
  kv.emplace_back("experiment.variant", variant_name(cfg.variant));
  std::string variants;
  for (std::size_t i = 0; i < cfg.ablation_variants.size(); ++i) {
    if (i) variants += ",";
    variants += variant_name(cfg.ablation_variants[i]);
  }
  kv.emplace_back("experiment.variants", variants);
  kv.emplace_back("experiment.seeds", join(cfg.seeds));
  kv.emplace_back("experiment.out", cfg.out_dir.string());
  kv.emplace_back("experiment.export_per_split", std::to_string(cfg.export_per_split));
  kv.emplace_back("experiment.jobs", std::to_string(cfg.jobs));
  return kv;
}

std::string echo_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : echo(cfg)) out += k + " = " + v + "\n";
  return out;
}

train::HyperParams effective_hyper(const ExperimentConfig& cfg, Variant v, std::uint64_t seed) {
  train::HyperParams hp = cfg.hp;
  hp.seed = seed;
  const VariantTerms t = variant_terms(v);
  hp.toggles = {t.domain, t.entropy, t.vat, t.unsupervised};
  if (!t.domain) hp.weights.lambda_d = 0.0;
  if (!t.vat) hp.weights.lambda_s = 0.0;
  if (!t.vat && !t.entropy) hp.weights.lambda_t = 0.0;
  if (!t.unsupervised) hp.weights.lambda_u = 0.0;
  return hp;
}

ExperimentConfig cell_config(const ExperimentConfig& cfg, Variant v, std::uint64_t seed) {
  ExperimentConfig c = cfg;
  c.variant = v;
  c.seeds = {seed};
  c.hp = effective_hyper(cfg, v, seed);
  return c;
}

data::DomainShiftDataset make_dataset(const ExperimentConfig& cfg) {
  if (cfg.use_csv) return data::load_dataset(cfg.csv);
  return data::generate(cfg.shift);
}

}  // namespace gada::bench
