// Command-line front end over the C API.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gada/gada.h"

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;

// Status failure carrying the exit code it maps to.
struct Failure {
  int code;
  std::string message;
};

void check(gada_status st, const std::string& context, int code = kRuntime) {
  if (st != GADA_OK) throw Failure{code, context + ": " + gada_status_name(st) + ": " + gada_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};
using Config = Handle<gada_config, gada_config_free>;
using Dataset = Handle<gada_dataset, gada_dataset_free>;
using State = Handle<gada_state, gada_state_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  gada_string_free(s);
  return out;
}

struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> sets;

  void add_to(CLI::App* app) {
    app->add_option("-c,--config", config_path, "configuration file (key = value lines)");
    app->add_option("-s,--set", sets, "override one key, KEY=VALUE (repeatable)");
  }

  // Base is the file when given, else the state's recorded config, else defaults.
  void resolve(Config& cfg, const gada_state* state = nullptr) const {
    if (!config_path.empty()) {
      check(gada_config_load(config_path.c_str(), cfg.out()), "loading " + config_path, kUsage);
    } else if (state) {
      check(gada_state_config(state, cfg.out()), "reading checkpoint configuration", kUsage);
    } else {
      check(gada_config_new(cfg.out()), "creating configuration", kUsage);
    }
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Failure{kUsage, "--set expects KEY=VALUE, got '" + kv + "'"};
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      check(gada_config_set(cfg.get(), trim(kv.substr(0, eq)).c_str(), trim(kv.substr(eq + 1)).c_str()),
            "--set " + kv, kUsage);
    }
  }
};

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Failure{kRuntime, "cannot write '" + path.string() + "'"};
}

void print_accuracy(const gada_state* state, const gada_dataset* ds) {
  double target = 0, source = 0;
  check(gada_evaluate(state, ds, &target, &source), "evaluating");
  uint64_t steps = 0, refine = 0;
  check(gada_state_steps(state, &steps, &refine), "reading state");
  std::printf("steps %llu refine_steps %llu target_accuracy %.4f source_accuracy %.4f\n",
              static_cast<unsigned long long>(steps), static_cast<unsigned long long>(refine), target, source);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gada: generative adversarial domain adaptation on synthetic shift benchmarks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gada_version());

  auto* gen = app.add_subcommand("gen-data", "generate a shifted dataset and write its CSV files");
  ConfigArgs gen_cfg;
  std::string gen_out;
  gen_cfg.add_to(gen);
  gen->add_option("-o,--out", gen_out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the configured variant for every configured seed");
  ConfigArgs train_cfg;
  std::string train_out, train_resume;
  std::uint64_t train_steps = 0;
  train_cfg.add_to(train);
  train->add_option("-o,--out", train_out, "output directory (overrides experiment.out)");
  train->add_option("--resume", train_resume, "continue a checkpoint instead of starting fresh");
  train->add_option("--steps", train_steps, "total iterations when resuming (default hyper.steps)");

  auto* refine = app.add_subcommand("refine", "refine a trained checkpoint on the target domain");
  ConfigArgs refine_cfg;
  std::string refine_ckpt, refine_out;
  refine_cfg.add_to(refine);
  refine->add_option("--checkpoint", refine_ckpt, "trained checkpoint")->required();
  refine->add_option("-o,--out", refine_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  ConfigArgs eval_cfg;
  std::string eval_ckpt, eval_metrics;
  eval_cfg.add_to(eval);
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
  eval->add_option("--metrics", eval_metrics, "also write the metrics document here");

  auto* ablate = app.add_subcommand("ablate", "run every configured variant over every seed");
  ConfigArgs ablate_cfg;
  std::string ablate_out;
  std::size_t ablate_jobs = 0;
  ablate_cfg.add_to(ablate);
  ablate->add_option("-o,--out", ablate_out, "output directory (overrides experiment.out)");
  ablate->add_option("-j,--jobs", ablate_jobs, "worker threads (overrides experiment.jobs)");

  auto* grad = app.add_subcommand("grad-check", "run the loss-gradient oracle suite");
  std::size_t grad_trials = 20;
  std::uint64_t grad_seed = 7;
  grad->add_option("--trials", grad_trials, "random networks per loss")->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_seed, "seed for the random networks");

  auto* feats = app.add_subcommand("export-features", "write phi features and their 2-D PCA as CSV");
  ConfigArgs feats_cfg;
  std::string feats_ckpt, feats_out;
  std::size_t feats_n = 0;
  feats_cfg.add_to(feats);
  feats->add_option("--checkpoint", feats_ckpt, "trained checkpoint")->required();
  feats->add_option("-o,--out", feats_out, "CSV path")->required();
  feats->add_option("-n,--per-split", feats_n, "rows per split (default experiment.export_per_split)");

  auto* plot = app.add_subcommand("plot", "render a feature CSV as an SVG scatter plot");
  std::string plot_in, plot_out, plot_title;
  plot->add_option("--features", plot_in, "feature CSV")->required();
  plot->add_option("-o,--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title, "plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (gen->parsed()) {
      Config cfg;
      gen_cfg.resolve(cfg);
      Dataset ds;
      check(gada_dataset_from_config(cfg.get(), ds.out()), "generating data");
      check(gada_dataset_export(ds.get(), gen_out.c_str()), "writing data");
      write_file(std::filesystem::path(gen_out) / "config.txt", [&] {
        char* s = nullptr;
        check(gada_config_echo(cfg.get(), &s), "echoing config");
        return take(s);
      }());
      size_t ns = 0, nt = 0, nv = 0, d = 0, k = 0;
      check(gada_dataset_info(ds.get(), &ns, &nt, &nv, &d, &k), "dataset info");
      std::printf("wrote %s: source %zu target %zu test %zu, dim %zu, classes %zu\n", gen_out.c_str(), ns, nt, nv,
                  d, k);
    } else if (train->parsed()) {
      if (!train_resume.empty()) {
        if (train_out.empty()) throw Failure{kUsage, "--resume needs --out"};
        State st;
        check(gada_state_load(train_resume.c_str(), st.out()), "loading " + train_resume);
        Config cfg;
        train_cfg.resolve(cfg, st.get());
        Dataset ds;
        check(gada_dataset_from_config(cfg.get(), ds.out()), "loading data");
        std::uint64_t steps = train_steps;
        if (steps == 0) {
          char* s = nullptr;
          check(gada_config_get(cfg.get(), "hyper.steps", &s), "reading hyper.steps");
          steps = std::stoull(take(s));
        }
        check(gada_resume(st.get(), ds.get(), steps), "resuming");
        const std::filesystem::path out = train_out;
        std::filesystem::create_directories(out);
        check(gada_state_save(st.get(), (out / "checkpoint.gada").string().c_str()), "saving checkpoint");
        char* m = nullptr;
        check(gada_state_metrics_json(st.get(), &m), "metrics");
        write_file(out / "metrics.json", take(m));
        print_accuracy(st.get(), ds.get());
      } else {
        Config cfg;
        train_cfg.resolve(cfg);
        if (!train_out.empty()) check(gada_config_set(cfg.get(), "experiment.out", train_out.c_str()), "--out", kUsage);
        char* summary = nullptr;
        check(gada_run_experiment(cfg.get(), &summary), "training");
        std::fputs(take(summary).c_str(), stdout);
      }
    } else if (refine->parsed()) {
      State st;
      check(gada_state_load(refine_ckpt.c_str(), st.out()), "loading " + refine_ckpt);
      Config cfg;
      refine_cfg.resolve(cfg, st.get());
      Dataset ds;
      check(gada_dataset_from_config(cfg.get(), ds.out()), "loading data");
      check(gada_refine(st.get(), cfg.get(), ds.get()), "refining");
      const std::filesystem::path out = refine_out;
      std::filesystem::create_directories(out);
      check(gada_state_save(st.get(), (out / "checkpoint.gada").string().c_str()), "saving checkpoint");
      char* m = nullptr;
      check(gada_state_metrics_json(st.get(), &m), "metrics");
      write_file(out / "metrics.json", take(m));
      print_accuracy(st.get(), ds.get());
    } else if (eval->parsed()) {
      State st;
      check(gada_state_load(eval_ckpt.c_str(), st.out()), "loading " + eval_ckpt);
      Config cfg;
      eval_cfg.resolve(cfg, st.get());
      Dataset ds;
      check(gada_dataset_from_config(cfg.get(), ds.out()), "loading data");
      print_accuracy(st.get(), ds.get());
      if (!eval_metrics.empty()) {
        char* m = nullptr;
        check(gada_state_metrics_json(st.get(), &m), "metrics");
        write_file(eval_metrics, take(m));
      }
    } else if (ablate->parsed()) {
      Config cfg;
      ablate_cfg.resolve(cfg);
      if (!ablate_out.empty()) check(gada_config_set(cfg.get(), "experiment.out", ablate_out.c_str()), "--out", kUsage);
      if (ablate_jobs > 0)
        check(gada_config_set(cfg.get(), "experiment.jobs", std::to_string(ablate_jobs).c_str()), "--jobs", kUsage);
      char* table = nullptr;
      const gada_status st = gada_run_ablation(cfg.get(), &table);
      check(st, "ablation", st == GADA_ERR_CONTRACT ? kUsage : kRuntime);
      std::fputs(take(table).c_str(), stdout);
    } else if (grad->parsed()) {
      int passed = 0;
      char* report = nullptr;
      check(gada_grad_check(grad_trials, grad_seed, &passed, &report), "gradient check");
      std::fputs(take(report).c_str(), stdout);
      std::puts(passed ? "all gradient checks passed" : "gradient checks FAILED");
      return passed ? kOk : kRuntime;
    } else if (feats->parsed()) {
      State st;
      check(gada_state_load(feats_ckpt.c_str(), st.out()), "loading " + feats_ckpt);
      Config cfg;
      feats_cfg.resolve(cfg, st.get());
      Dataset ds;
      check(gada_dataset_from_config(cfg.get(), ds.out()), "loading data");
      std::size_t n = feats_n;
      if (n == 0) {
        char* s = nullptr;
        check(gada_config_get(cfg.get(), "experiment.export_per_split", &s), "reading export size");
        n = std::stoul(take(s));
      }
      check(gada_export_features(st.get(), ds.get(), n, feats_out.c_str()), "exporting features");
      double sep = 0;
      if (gada_cluster_separation(feats_out.c_str(), &sep) == GADA_OK) {
        std::printf("wrote %s; cluster separation %.4f\n", feats_out.c_str(), sep);
      } else {
        std::printf("wrote %s; cluster separation unavailable: %s\n", feats_out.c_str(), gada_last_error());
      }
    } else if (plot->parsed()) {
      check(gada_plot_features(plot_in.c_str(), plot_out.c_str(), plot_title.c_str()), "plotting");
      std::printf("wrote %s\n", plot_out.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "gada: %s\n", f.message.c_str());
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gada: %s\n", e.what());
    return kRuntime;
  }
  return kOk;
}
