#include "bench/grad_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "autodiff/grad_check.hpp"
#include "common/rng.hpp"
#include "losses/losses.hpp"
#include "nets/models.hpp"

namespace gada::bench {

namespace {

using ad::Bound;
using ad::ParamStore;
using ad::Tape;
using ad::Tensor;
using ad::Var;

constexpr std::size_t kClasses = 4;
constexpr std::size_t kBatch = 6;
constexpr std::size_t kNoise = 3;

struct Fixture {
  nets::ClassifierModel cls;
  nets::DiscriminatorModel disc;
  nets::GeneratorModel gen;
  Tensor x_source, x_target, x_generated, z;
  std::vector<int> labels;
};

Tensor uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::matrix(rows, cols, std::move(v));
}

void jitter_biases(ParamStore& store, Rng& rng) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    if (e.name.find("/b") == std::string::npos) continue;
    for (double& v : e.value.values()) v = rng.uniform(-0.5, 0.5);
  }
}

Fixture make_fixture(std::uint64_t seed) {
  Rng rng(seed);
  const double alpha = 0.1;
  Fixture f{
      nets::ClassifierModel::create({{2, 8}, alpha, nets::Head::none}, {{8, 8, kClasses + 1}, alpha, nets::Head::linear},
                                    kClasses, rng.next_u64()),
      nets::DiscriminatorModel::create({{8, 8, 1}, alpha, nets::Head::sigmoid}, nets::DiscTap::features,
                                       rng.next_u64()),
      nets::GeneratorModel::create({{kNoise, 8, 2}, alpha, nets::Head::tanh}, rng.next_u64()),
      {}, {}, {}, {}, {}};
  jitter_biases(f.cls.params, rng);
  jitter_biases(f.disc.params, rng);
  jitter_biases(f.gen.params, rng);
  f.x_source = uniform(rng, kBatch, 2, -2, 2);
  f.x_target = uniform(rng, kBatch, 2, -2, 2);
  f.x_generated = uniform(rng, kBatch, 2, -2, 2);
  f.z = uniform(rng, kBatch, kNoise, -2, 2);
  for (std::size_t i = 0; i < kBatch; ++i) f.labels.push_back(1 + static_cast<int>(rng.below(kClasses)));
  return f;
}

Tensor plus(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

struct Case {
  const char* name;
  // Returns the parameters under test and the loss builder over them.
  std::function<std::pair<ParamStore, ad::LossBuilder>(const Fixture&, std::uint64_t trial_seed)> make;
};

std::vector<Case> cases() {
  std::vector<Case> out;
  out.push_back({"L_c (theta)", [](const Fixture& f, std::uint64_t) {
                   return std::pair{f.cls.params, ad::LossBuilder([&f](Tape& t, const Bound& b) {
                                      const auto o = nets::forward_classifier(f.cls, b, t.constant(f.x_source));
                                      return losses::classification(o.logits, f.labels, kClasses);
                                    })};
                 }});
  out.push_back({"L_d (theta_g, theta_D)", [](const Fixture& f, std::uint64_t) {
                   ParamStore ps = f.cls.params;
                   ps.append(f.disc.params);
                   return std::pair{ps, ad::LossBuilder([&f](Tape& t, const Bound& b) {
                                      const std::size_t nc = f.cls.params.size();
                                      const Bound theta = b.slice(0, nc);
                                      const Bound disc = b.slice(nc, b.size() - nc);
                                      const auto os = nets::forward_classifier(f.cls, theta, t.constant(f.x_source));
                                      const auto ot = nets::forward_classifier(f.cls, theta, t.constant(f.x_target));
                                      return losses::domain(
                                          nets::forward_discriminator(f.disc, disc, nets::disc_input(f.disc, os)),
                                          nets::forward_discriminator(f.disc, disc, nets::disc_input(f.disc, ot)));
                                    })};
                 }});
  out.push_back({"L_u (theta)", [](const Fixture& f, std::uint64_t) {
                   return std::pair{f.cls.params, ad::LossBuilder([&f](Tape& t, const Bound& b) {
                                      const auto ot = nets::forward_classifier(f.cls, b, t.constant(f.x_target));
                                      const auto og = nets::forward_classifier(f.cls, b, t.constant(f.x_generated));
                                      return losses::unsupervised(ot.logits, og.logits, kClasses);
                                    })};
                 }});
  out.push_back({"L_e (theta)", [](const Fixture& f, std::uint64_t) {
                   return std::pair{f.cls.params, ad::LossBuilder([&f](Tape& t, const Bound& b) {
                                      const auto o = nets::forward_classifier(f.cls, b, t.constant(f.x_target));
                                      return losses::entropy(o.logits);
                                    })};
                 }});
  out.push_back({"L_v (theta, r frozen)", [](const Fixture& f, std::uint64_t trial_seed) {
                   // The clean prediction and r are frozen at the base point,
                   // so only the perturbed branch depends on theta.
                   const Tensor clean = nets::forward_classifier(f.cls, f.x_target).logits;
                   Rng rng(trial_seed);
                   losses::VatConfig vat;
                   vat.epsilon = 0.5;
                   const Tensor shifted = plus(f.x_target, losses::vat_perturbation(f.cls, f.x_target, clean, vat, rng));
                   return std::pair{f.cls.params, ad::LossBuilder([&f, clean, shifted](Tape& t, const Bound& b) {
                                      const auto o = nets::forward_classifier(f.cls, b, t.constant(shifted));
                                      return losses::consistency_kl(t.constant(clean), o.logits);
                                    })};
                 }});
  out.push_back({"L_g (theta_G)", [](const Fixture& f, std::uint64_t) {
                   return std::pair{f.gen.params, ad::LossBuilder([&f](Tape& t, const Bound& b) {
                                      const Bound theta = ad::bind(t, f.cls.params, false);
                                      return losses::generator_objective(f.cls, theta, f.gen, b,
                                                                         t.constant(f.x_target), t.constant(f.z));
                                    })};
                 }});
  return out;
}

double max_abs(const ParamStore& grads, std::size_t first = 0, std::size_t last = SIZE_MAX) {
  double m = 0.0;
  for (std::size_t i = first; i < std::min(last, grads.size()); ++i)
    for (double v : grads.entry(i).value.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

bool GradSuiteReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const GradCase& c) { return c.passed; }) &&
         std::all_of(blocking.begin(), blocking.end(), [](const BlockCase& c) { return c.passed; });
}

GradSuiteReport run_grad_suite(const GradSuiteOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  GradSuiteReport report;
  report.options = options;
  const auto all = cases();
  for (const auto& c : all) report.cases.push_back({c.name, options.trials, 0, 0.0, 0.0, true});
  report.blocking.push_back({"L_g -> theta_g, theta_h", 0.0, true});
  report.blocking.push_back({"L_v clean branch -> theta", 0.0, true});

  for (std::size_t trial = 0; trial < options.trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(options.seed, 0x6743, trial);
    const Fixture f = make_fixture(trial_seed);
    for (std::size_t i = 0; i < all.size(); ++i) {
      auto [params, build] = all[i].make(f, trial_seed);
      const ad::CheckReport r = ad::grad_check(build, params, options.h, options.tol);
      GradCase& gc = report.cases[i];
      gc.checked += r.checked;
      gc.max_rel_error = std::max(gc.max_rel_error, r.max_rel_error);
      gc.max_abs_error = std::max(gc.max_abs_error, r.max_abs_error);
      gc.passed = gc.passed && r.passed();
    }

    {
      // Generator objective with the classifier bound trainable.
      Tape t;
      const Bound theta = ad::bind(t, f.cls.params, true);
      const Bound gen = ad::bind(t, f.gen.params, true);
      const Var l = losses::generator_objective(f.cls, theta, f.gen, gen, t.constant(f.x_target), t.constant(f.z));
      report.blocking[0].max_abs_grad = std::max(report.blocking[0].max_abs_grad, max_abs(ad::backward(l, theta)));
    }
    {
      // Only the clean branch depends on theta; the perturbed one is constant.
      Tape t;
      const Bound theta = ad::bind(t, f.cls.params, true);
      const auto o = nets::forward_classifier(f.cls, theta, t.constant(f.x_target));
      const Tensor pert = nets::forward_classifier(f.cls, plus(f.x_target, f.x_generated)).logits;
      const Var l = losses::consistency_kl(o.logits, t.constant(pert));
      report.blocking[1].max_abs_grad = std::max(report.blocking[1].max_abs_grad, max_abs(ad::backward(l, theta)));
    }
  }
  for (auto& b : report.blocking) b.passed = b.max_abs_grad <= options.block_tol;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string grad_suite_text(const GradSuiteReport& report) {
  std::string out;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-34s %6s %8s %12s %12s  %s\n", "loss", "trials", "coords", "max_rel_err",
                "max_abs_err", "result");
  out += buf;
  for (const auto& c : report.cases) {
    std::snprintf(buf, sizeof buf, "%-34s %6zu %8zu %12.3e %12.3e  %s\n", c.name.c_str(), c.trials, c.checked,
                  c.max_rel_error, c.max_abs_error, c.passed ? "PASS" : "FAIL");
    out += buf;
  }
  for (const auto& b : report.blocking) {
    const std::string label = "blocked " + b.name;
    std::snprintf(buf, sizeof buf, "%-34s %29s %12.3e  %s\n", label.c_str(), "", b.max_abs_grad,
                  b.passed ? "PASS" : "FAIL");
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "tolerance %.0e (h = %.0e), %.2f s\n", report.options.tol, report.options.h,
                report.seconds);
  out += buf;
  return out;
}

}  // namespace gada::bench
