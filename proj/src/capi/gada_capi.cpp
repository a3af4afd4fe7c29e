#include "gada/gada.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>

#include "bench/config.hpp"
#include "bench/experiment.hpp"
#include "bench/features.hpp"
#include "bench/grad_suite.hpp"
#include "common/error.hpp"
#include "trainer/trainer.hpp"

struct gada_config {
  gada::bench::ExperimentConfig cfg;
};
struct gada_dataset {
  gada::data::DomainShiftDataset ds;
};
struct gada_state {
  gada::train::TrainState state;
};

namespace {

thread_local std::string g_last_error;

gada_status status_of(gada::ErrorKind kind) {
  using gada::ErrorKind;
  switch (kind) {
    case ErrorKind::invalid_argument: return GADA_ERR_INVALID_ARGUMENT;
    case ErrorKind::dimension: return GADA_ERR_DIMENSION;
    case ErrorKind::contract: return GADA_ERR_CONTRACT;
    case ErrorKind::parse: return GADA_ERR_PARSE;
    case ErrorKind::format: return GADA_ERR_FORMAT;
    case ErrorKind::io: return GADA_ERR_IO;
    case ErrorKind::numeric: return GADA_ERR_NUMERIC;
  }
  return GADA_ERR_INTERNAL;
}

template <typename F>
gada_status guard(F&& f) noexcept {
  g_last_error.clear();
  try {
    f();
    return GADA_OK;
  } catch (const gada::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return GADA_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return GADA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return GADA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return GADA_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw gada::ConfigError(std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* gada_version(void) { return "1.0.0"; }

const char* gada_status_name(gada_status status) {
  switch (status) {
    case GADA_OK: return "ok";
    case GADA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case GADA_ERR_DIMENSION: return "dimension error";
    case GADA_ERR_CONTRACT: return "contract violation";
    case GADA_ERR_PARSE: return "parse error";
    case GADA_ERR_FORMAT: return "format error";
    case GADA_ERR_IO: return "i/o error";
    case GADA_ERR_NUMERIC: return "numeric error";
    case GADA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* gada_last_error(void) { return g_last_error.c_str(); }

void gada_string_free(char* s) { std::free(s); }

gada_status gada_config_new(gada_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new gada_config{};
  });
}

gada_status gada_config_parse(const char* text, gada_config** out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = new gada_config{gada::bench::parse_config(text)};
  });
}

gada_status gada_config_load(const char* path, gada_config** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new gada_config{gada::bench::load_config(path)};
  });
}

gada_status gada_config_set(gada_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(value, "value");
    cfg->cfg.set(key, value);
  });
}

gada_status gada_config_get(const gada_config* cfg, const char* key, char** out_value) {
  return guard([&] {
    require(cfg, "config");
    require(key, "key");
    require(out_value, "out_value");
    for (const auto& [k, v] : gada::bench::echo(cfg->cfg)) {
      if (k == key) {
        *out_value = dup_string(v);
        return;
      }
    }
    throw gada::ConfigError("unknown configuration key '" + std::string(key) + "'");
  });
}

gada_status gada_config_echo(const gada_config* cfg, char** out_text) {
  return guard([&] {
    require(cfg, "config");
    require(out_text, "out_text");
    *out_text = dup_string(gada::bench::echo_text(cfg->cfg));
  });
}

void gada_config_free(gada_config* cfg) { delete cfg; }

gada_status gada_dataset_from_config(const gada_config* cfg, gada_dataset** out) {
  return guard([&] {
    require(cfg, "config");
    require(out, "out");
    *out = new gada_dataset{gada::bench::make_dataset(cfg->cfg)};
  });
}

gada_status gada_dataset_export(const gada_dataset* ds, const char* dir) {
  return guard([&] {
    require(ds, "dataset");
    require(dir, "dir");
    gada::data::export_dataset(ds->ds, dir);
  });
}

gada_status gada_dataset_info(const gada_dataset* ds, size_t* n_source, size_t* n_target, size_t* n_test,
                              size_t* dim, size_t* num_classes) {
  return guard([&] {
    require(ds, "dataset");
    if (n_source) *n_source = ds->ds.source_x.rows();
    if (n_target) *n_target = ds->ds.target_x.rows();
    if (n_test) *n_test = ds->ds.test_x.rows();
    if (dim) *dim = ds->ds.dim();
    if (num_classes) *num_classes = ds->ds.num_classes;
  });
}

void gada_dataset_free(gada_dataset* ds) { delete ds; }

gada_status gada_train(const gada_config* cfg, const gada_dataset* ds, gada_state** out) {
  return guard([&] {
    require(cfg, "config");
    require(ds, "dataset");
    require(out, "out");
    const auto& c = cfg->cfg;
    auto o = gada::bench::run_cell(c, ds->ds, c.variant, c.seeds.front(), {});
    *out = new gada_state{std::move(*o.state)};
  });
}

gada_status gada_resume(gada_state* state, const gada_dataset* ds, uint64_t steps) {
  return guard([&] {
    require(state, "state");
    require(ds, "dataset");
    auto& s = state->state;
    if (s.dirt_step > 0) throw gada::ContractError("cannot resume training after refinement has started");
    if (steps < s.step) throw gada::ContractError("requested steps are below the completed step count");
    s.hp.steps = steps;
    for (auto& [k, v] : s.config_echo)
      if (k == "hyper.steps") v = std::to_string(steps);
    gada::train::resume(s, ds->ds);
  });
}

gada_status gada_refine(gada_state* state, const gada_config* cfg, const gada_dataset* ds) {
  return guard([&] {
    require(state, "state");
    require(cfg, "config");
    require(ds, "dataset");
    auto& s = state->state;
    const gada::train::HyperParams& from = cfg->cfg.hp;
    gada::train::HyperParams hp = s.hp;
    hp.dirt_beta = from.dirt_beta;
    hp.dirt_steps = from.dirt_steps;
    hp.dirt_refresh_interval = from.dirt_refresh_interval;
    hp.vat = from.vat;
    hp.weights.lambda_t = from.weights.lambda_t;
    hp.lr_cls = from.lr_cls;
    hp.adam_beta1 = from.adam_beta1;
    hp.adam_beta2 = from.adam_beta2;
    hp.adam_eps = from.adam_eps;
    hp.batch = from.batch;
    hp.eval_interval = from.eval_interval;
    hp.validate();
    s.hp = hp;
    for (auto& [k, v] : s.config_echo) {
      if (k == "experiment.variant") v = "gada_dirtt";
      for (const auto& [hk, hv] : gada::train::to_key_values(hp))
        if (k == hk) v = hv;
    }
    gada::train::dirtt_refine(s, ds->ds, hp);
  });
}

gada_status gada_evaluate(const gada_state* state, const gada_dataset* ds, double* target_accuracy,
                          double* source_accuracy) {
  return guard([&] {
    require(state, "state");
    require(ds, "dataset");
    const auto& s = state->state;
    const auto prepared = gada::train::prepare(ds->ds, s.hp);
    if (prepared.dim() != s.input_dim) throw gada::DimensionError("dataset dimension does not match the model");
    if (target_accuracy) *target_accuracy = gada::train::evaluate(s, ds->ds).accuracy;
    if (source_accuracy)
      *source_accuracy =
          gada::train::evaluate(s.nets.classifier, prepared.source_x, prepared.source_y).accuracy;
  });
}

gada_status gada_state_steps(const gada_state* state, uint64_t* steps, uint64_t* refine_steps) {
  return guard([&] {
    require(state, "state");
    if (steps) *steps = state->state.step;
    if (refine_steps) *refine_steps = state->state.dirt_step;
  });
}

gada_status gada_state_config(const gada_state* state, gada_config** out) {
  return guard([&] {
    require(state, "state");
    require(out, "out");
    auto c = std::make_unique<gada_config>();
    for (const auto& [k, v] : state->state.config_echo) c->cfg.set(k, v);
    *out = c.release();
  });
}

gada_status gada_state_metrics_json(const gada_state* state, char** out_json) {
  return guard([&] {
    require(state, "state");
    require(out_json, "out_json");
    *out_json = dup_string(gada::train::metrics_json(state->state));
  });
}

gada_status gada_state_save(const gada_state* state, const char* path) {
  return guard([&] {
    require(state, "state");
    require(path, "path");
    gada::train::save_checkpoint(state->state, path);
  });
}

gada_status gada_state_load(const char* path, gada_state** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new gada_state{gada::train::load_checkpoint(path)};
  });
}

void gada_state_free(gada_state* state) { delete state; }

gada_status gada_export_features(const gada_state* state, const gada_dataset* ds, size_t n_per_split,
                                 const char* csv_path) {
  return guard([&] {
    require(state, "state");
    require(ds, "dataset");
    require(csv_path, "csv_path");
    gada::bench::write_feature_csv(gada::bench::export_features(state->state, ds->ds, n_per_split), csv_path);
  });
}

gada_status gada_plot_features(const char* csv_path, const char* svg_path, const char* title) {
  return guard([&] {
    require(csv_path, "csv_path");
    require(svg_path, "svg_path");
    const auto table = gada::bench::load_feature_csv(csv_path);
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw gada::IoError("cannot write '" + std::string(svg_path) + "'");
    out << gada::bench::scatter_svg(table, title ? title : "");
    if (!out) throw gada::IoError("write failed for '" + std::string(svg_path) + "'");
  });
}

gada_status gada_cluster_separation(const char* csv_path, double* out_value) {
  return guard([&] {
    require(csv_path, "csv_path");
    require(out_value, "out_value");
    *out_value = gada::bench::cluster_separation(gada::bench::load_feature_csv(csv_path)).value;
  });
}

gada_status gada_run_experiment(const gada_config* cfg, char** out_summary) {
  return guard([&] {
    require(cfg, "config");
    const auto results = gada::bench::run_experiment(cfg->cfg);
    if (out_summary) {
      std::string s;
      char buf[200];
      for (const auto& r : results) {
        std::snprintf(buf, sizeof buf, "%s seed %llu: target %.4f source %.4f separation %.4f (%.1f s) -> %s\n",
                      gada::bench::variant_name(r.variant), static_cast<unsigned long long>(r.seed), r.accuracy,
                      r.source_accuracy, r.separation, r.seconds, r.dir.string().c_str());
        s += buf;
      }
      *out_summary = dup_string(s);
    }
  });
}

gada_status gada_run_ablation(const gada_config* cfg, char** out_table) {
  return guard([&] {
    require(cfg, "config");
    const auto table = gada::bench::run_ablation(cfg->cfg);
    if (out_table) *out_table = dup_string(gada::bench::ablation_text(table));
  });
}

gada_status gada_grad_check(size_t trials, uint64_t seed, int* passed, char** out_report) {
  return guard([&] {
    require(passed, "passed");
    gada::bench::GradSuiteOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    const auto report = gada::bench::run_grad_suite(opt);
    *passed = report.passed() ? 1 : 0;
    if (out_report) *out_report = dup_string(gada::bench::grad_suite_text(report));
  });
}

}  // extern "C"
