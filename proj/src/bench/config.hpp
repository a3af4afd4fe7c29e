#ifndef GADA_BENCH_CONFIG_HPP
#define GADA_BENCH_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "data/dataset.hpp"
#include "trainer/hyper.hpp"

namespace gada::bench {

enum class Variant { source_only, dann, dann_e, dann_v, dann_u, vada, gada, gada_dirtt };

const char* variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();

// Which loss terms a variant trains with.
struct VariantTerms {
  bool domain, entropy, vat, unsupervised, refine;
};
VariantTerms variant_terms(Variant v);

struct ExperimentConfig {
  bool use_csv = false;
  data::ShiftSpec shift;
  data::CsvPaths csv;
  train::HyperParams hp;
  Variant variant = Variant::gada;
  std::vector<Variant> ablation_variants = all_variants();
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path out_dir = "gada_out";
  std::size_t export_per_split = 200;
  std::size_t jobs = 1;

  // Applies one dotted key; throws ConfigError on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
};

// `key = value` lines, `#` comments, blank lines ignored.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Every key with its resolved value, in a fixed order.
train::KeyValues echo(const ExperimentConfig& cfg);
std::string echo_text(const ExperimentConfig& cfg);

// Hyperparameters a (variant, seed) cell trains with: toggles from the
// variant table, weights of disabled terms zeroed.
train::HyperParams effective_hyper(const ExperimentConfig& cfg, Variant v, std::uint64_t seed);

// The configuration of one cell, as echoed into its metrics document.
ExperimentConfig cell_config(const ExperimentConfig& cfg, Variant v, std::uint64_t seed);

data::DomainShiftDataset make_dataset(const ExperimentConfig& cfg);

}  // namespace gada::bench

#endif  // GADA_BENCH_CONFIG_HPP
