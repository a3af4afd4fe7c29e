#ifndef GADA_BENCH_EXPERIMENT_HPP
#define GADA_BENCH_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bench/config.hpp"
#include "trainer/trainer.hpp"

namespace gada::bench {

struct CellResult {
  Variant variant = Variant::gada;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // diagnostic when !ok
  double accuracy = 0.0;
  double source_accuracy = 0.0;
  double separation = 0.0;
  double centroid_distance = 0.0;  // numerator of the separation ratio
  double within_spread = 0.0;      // denominator
  double seconds = 0.0;
  std::filesystem::path dir;
};

struct CellOutcome {
  CellResult result;
  std::optional<train::TrainState> state;
};

// Trains one (variant, seed) cell. gada_dirtt refines `pretrained` when given
// (a finished gada state for the same seed), otherwise it trains gada first.
// Writes metrics.json, timing.json, confusion.csv, checkpoint.gada,
// features.csv and features.svg under `dir` when it is non-empty.
CellOutcome run_cell(const ExperimentConfig& cfg, const data::DomainShiftDataset& ds, Variant v,
                     std::uint64_t seed, const std::filesystem::path& dir,
                     const train::TrainState* pretrained = nullptr);

std::filesystem::path cell_dir(const ExperimentConfig& cfg, Variant v, std::uint64_t seed);

// cfg.variant over cfg.seeds. A failed seed throws.
std::vector<CellResult> run_experiment(const ExperimentConfig& cfg, bool write_outputs = true);

struct VariantSummary {
  Variant variant = Variant::gada;
  std::size_t ok = 0;
  std::size_t failed = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double median_separation = 0.0;
};

struct AblationTable {
  std::vector<CellResult> cells;
  std::vector<VariantSummary> summary;  // in cfg.ablation_variants order

  const VariantSummary& at(Variant v) const;
};

double median(std::vector<double> xs);
// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> xs, double q);

AblationTable summarize(const std::vector<Variant>& variants, std::vector<CellResult> cells);

// Every variant in cfg.ablation_variants over cfg.seeds (at least 5). A failed
// cell is recorded and excluded from its variant's statistics. Seeds run on
// up to cfg.jobs worker threads.
AblationTable run_ablation(const ExperimentConfig& cfg, bool write_outputs = true);

std::string ablation_json(const AblationTable& table, const ExperimentConfig& cfg);
std::string ablation_text(const AblationTable& table);

}  // namespace gada::bench

#endif  // GADA_BENCH_EXPERIMENT_HPP
