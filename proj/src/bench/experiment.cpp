#include "bench/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "bench/features.hpp"
#include "common/error.hpp"
#include "common/text.hpp"

namespace gada::bench {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string confusion_csv(const train::Evaluation& ev) {
  std::string out = "true\\pred";
  for (std::size_t j = 0; j < ev.confusion.size(); ++j) out += "," + std::to_string(j + 1);
  out += "\n";
  for (std::size_t i = 0; i < ev.confusion.size(); ++i) {
    out += std::to_string(i + 1);
    for (auto c : ev.confusion[i]) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

}  // namespace

std::filesystem::path cell_dir(const ExperimentConfig& cfg, Variant v, std::uint64_t seed) {
  return cfg.out_dir / variant_name(v) / ("seed_" + std::to_string(seed));
}

CellOutcome run_cell(const ExperimentConfig& cfg, const data::DomainShiftDataset& ds, Variant v,
                     std::uint64_t seed, const std::filesystem::path& dir,
                     const train::TrainState* pretrained) {
  CellOutcome out;
  out.result.variant = v;
  out.result.seed = seed;
  out.result.dir = dir;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentConfig cell = cell_config(cfg, v, seed);
  const train::HyperParams& hp = cell.hp;

  train::TrainState state;
  if (v == Variant::gada_dirtt) {
    if (pretrained) {
      state = *pretrained;
    } else {
      state = train::train(effective_hyper(cfg, Variant::gada, seed), ds);
    }
    state.hp = hp;
    train::dirtt_refine(state, ds, hp);
  } else {
    state = train::train(hp, ds);
  }
  state.config_echo = echo(cell);

  const train::Evaluation final_eval = state.evaluations.back();
  out.result.accuracy = final_eval.accuracy;
  {
    const auto prepared = train::prepare(ds, state.hp);
    out.result.source_accuracy =
        train::evaluate(state.nets.classifier, prepared.source_x, prepared.source_y).accuracy;
  }
  const FeatureTable features = export_features(state, ds, cfg.export_per_split);
  try {
    const Separation sep = cluster_separation(features);
    out.result.separation = sep.value;
    out.result.centroid_distance = sep.between;
    out.result.within_spread = sep.within;
  } catch (const ContractError&) {
    out.result.separation = out.result.centroid_distance = out.result.within_spread = std::nan("");
  }
  out.result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    write_text(dir / "metrics.json", train::metrics_json(state));
    nlohmann::ordered_json timing = {{"variant", variant_name(v)},
                                     {"seed", seed},
                                     {"wall_seconds", out.result.seconds}};
    write_text(dir / "timing.json", timing.dump(2) + "\n");
    write_text(dir / "confusion.csv", confusion_csv(final_eval));
    train::save_checkpoint(state, dir / "checkpoint.gada");
    write_feature_csv(features, dir / "features.csv");
    write_text(dir / "features.svg",
               scatter_svg(features, std::string(variant_name(v)) + " seed " + std::to_string(seed)));
  }
  out.result.ok = true;
  out.state = std::move(state);
  return out;
}

std::vector<CellResult> run_experiment(const ExperimentConfig& cfg, bool write_outputs) {
  const data::DomainShiftDataset ds = make_dataset(cfg);
  std::vector<CellResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    const auto dir = write_outputs ? cell_dir(cfg, cfg.variant, seed) : std::filesystem::path{};
    results.push_back(run_cell(cfg, ds, cfg.variant, seed, dir).result);
  }
  return results;
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

const VariantSummary& AblationTable::at(Variant v) const {
  for (const auto& s : summary)
    if (s.variant == v) return s;
  throw ContractError(std::string("variant '") + variant_name(v) + "' not in ablation table");
}

AblationTable summarize(const std::vector<Variant>& variants, std::vector<CellResult> cells) {
  AblationTable table;
  std::sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    return a.variant != b.variant ? a.variant < b.variant : a.seed < b.seed;
  });
  for (Variant v : variants) {
    VariantSummary s;
    s.variant = v;
    std::vector<double> acc, sep;
    for (const auto& c : cells) {
      if (c.variant != v) continue;
      if (!c.ok) {
        ++s.failed;
        continue;
      }
      ++s.ok;
      acc.push_back(c.accuracy);
      if (std::isfinite(c.separation)) sep.push_back(c.separation);
    }
    s.median = median(acc);
    s.q1 = quantile(acc, 0.25);
    s.q3 = quantile(acc, 0.75);
    s.median_separation = median(sep);
    table.summary.push_back(s);
  }
  table.cells = std::move(cells);
  return table;
}

AblationTable run_ablation(const ExperimentConfig& cfg, bool write_outputs) {
  if (cfg.seeds.size() < 5) throw ContractError("ablation needs at least 5 seeds");
  const data::DomainShiftDataset ds = make_dataset(cfg);
  const auto& variants = cfg.ablation_variants;
  const bool has_gada = std::find(variants.begin(), variants.end(), Variant::gada) != variants.end();

  std::vector<CellResult> cells;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  auto run_seed = [&](std::uint64_t seed) {
    std::optional<train::TrainState> gada_state;
    // gada_dirtt last so the refinement can start from the gada state.
    std::vector<Variant> order;
    for (Variant v : variants)
      if (v != Variant::gada_dirtt) order.push_back(v);
    if (order.size() != variants.size()) order.push_back(Variant::gada_dirtt);
    for (Variant v : order) {
      CellResult r;
      r.variant = v;
      r.seed = seed;
      const auto dir = write_outputs ? cell_dir(cfg, v, seed) : std::filesystem::path{};
      r.dir = dir;
      try {
        const train::TrainState* pre = (v == Variant::gada_dirtt && gada_state) ? &*gada_state : nullptr;
        CellOutcome o = run_cell(cfg, ds, v, seed, dir, pre);
        r = o.result;
        if (v == Variant::gada && has_gada) gada_state = std::move(o.state);
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
      std::lock_guard<std::mutex> lock(mu);
      cells.push_back(std::move(r));
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.jobs, cfg.seeds.size()));
  if (workers == 1) {
    for (auto seed : cfg.seeds) run_seed(seed);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) run_seed(cfg.seeds[i]);
      });
    }
    for (auto& t : pool) t.join();
  }

  AblationTable table = summarize(variants, std::move(cells));
  if (write_outputs) {
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir / "ablation.json", ablation_json(table, cfg));
    write_text(cfg.out_dir / "ablation.txt", ablation_text(table));
  }
  return table;
}

std::string ablation_json(const AblationTable& table, const ExperimentConfig& cfg) {
  nlohmann::ordered_json doc;
  doc["format"] = "gada-ablation v1";
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  for (const auto& [k, v] : echo(cfg)) config[k] = v;
  doc["config"] = config;
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  for (const auto& s : table.summary) {
    summary.push_back({{"variant", variant_name(s.variant)},
                       {"ok", s.ok},
                       {"failed", s.failed},
                       {"median_accuracy", num(s.median)},
                       {"q1", num(s.q1)},
                       {"q3", num(s.q3)},
                       {"median_separation", num(s.median_separation)}});
  }
  doc["summary"] = summary;
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (const auto& c : table.cells) {
    nlohmann::ordered_json j = {{"variant", variant_name(c.variant)}, {"seed", c.seed}, {"ok", c.ok}};
    if (c.ok) {
      j["target_accuracy"] = c.accuracy;
      j["source_accuracy"] = c.source_accuracy;
      j["separation"] = num(c.separation);
      j["centroid_distance"] = num(c.centroid_distance);
      j["within_spread"] = num(c.within_spread);
    } else {
      j["error"] = c.error;
    }
    cells.push_back(j);
  }
  doc["cells"] = cells;
  return doc.dump(2) + "\n";
}

std::string ablation_text(const AblationTable& table) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %6s %6s %9s %9s %9s %11s\n", "variant", "ok", "failed", "median",
                "q1", "q3", "separation");
  out += buf;
  for (const auto& s : table.summary) {
    std::snprintf(buf, sizeof buf, "%-12s %6zu %6zu %9.4f %9.4f %9.4f %11.4f\n", variant_name(s.variant), s.ok,
                  s.failed, s.median, s.q1, s.q3, s.median_separation);
    out += buf;
  }
  for (const auto& c : table.cells) {
    if (!c.ok) out += std::string("failed: ") + variant_name(c.variant) + " seed " + std::to_string(c.seed) + ": " + c.error + "\n";
  }
  return out;
}

}  // namespace gada::bench
