#include "losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "common/error.hpp"

namespace gada::losses {

using ad::Tensor;
using ad::Var;

namespace {

constexpr double kZeroProbe = 1e-30;

void normalize_rows(Tensor& d, const Tensor* fallback) {
  const std::size_t B = d.rows(), n = d.cols();
  for (std::size_t i = 0; i < B; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += d(i, j) * d(i, j);
    const double norm = std::sqrt(s);
    if (!(norm > kZeroProbe) || !std::isfinite(norm)) {
      if (!fallback) throw NumericError("vat_perturbation: degenerate random direction");
      for (std::size_t j = 0; j < n; ++j) d(i, j) = (*fallback)(i, j);
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) d(i, j) /= norm;
  }
}

}  // namespace

void VatConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ContractError("VAT epsilon must be non-negative");
  if (!(xi > 0.0)) throw ContractError("VAT xi must be positive");
  if (power_iterations < 1) throw ContractError("VAT needs at least one power iteration");
}

void LossWeights::validate() const {
  for (double w : {lambda_d, lambda_s, lambda_t, lambda_u}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("loss weights must be finite and >= 0");
  }
}

void check_labels(std::span<const int> labels, std::size_t num_classes) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1 || static_cast<std::size_t>(labels[i]) > num_classes) {
      throw ContractError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                          " outside 1.." + std::to_string(num_classes));
    }
  }
}

Var classification(Var logits, std::span<const int> labels, std::size_t num_classes) {
  check_labels(labels, num_classes);
  if (labels.size() != logits.value().rows()) {
    throw DimensionError("classification: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.value().rows()) + " rows");
  }
  std::vector<std::size_t> cols(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) cols[i] = static_cast<std::size_t>(labels[i] - 1);
  const Var conditional = ad::log_softmax(ad::slice_cols(logits, 0, num_classes));
  return ad::scale(ad::mean(ad::pick(conditional, cols)), -1.0);
}

Var domain(Var d_source, Var d_target) {
  const Var src = ad::mean(ad::log(d_source));
  const Var tgt = ad::mean(ad::log(ad::add_scalar(ad::scale(d_target, -1.0), 1.0)));
  return ad::add(src, tgt);
}

Var unsupervised(Var logits_target, Var logits_generated, std::size_t num_classes) {
  const double lo = nets::kProbClamp, hi = 1.0 - nets::kProbClamp;
  const Var p_real = ad::row_sum(ad::slice_cols(ad::softmax(logits_target), 0, num_classes));
  const Var p_fake =
      ad::slice_cols(ad::softmax(logits_generated), num_classes, num_classes + 1);
  const Var real_term = ad::mean(ad::log(ad::clamp(p_real, lo, hi)));
  const Var fake_term = ad::mean(ad::log(ad::clamp(p_fake, lo, hi)));
  return ad::scale(ad::add(real_term, fake_term), -1.0);
}

Var feature_matching(Var phi_real, Var phi_generated) {
  const Var real_mean = ad::detach(ad::col_mean(phi_real));
  return ad::l2_norm(ad::sub(real_mean, ad::col_mean(phi_generated)));
}

Var generator_objective(const nets::ClassifierModel& cls, const ad::Bound& theta,
                        const nets::GeneratorModel& gen, const ad::Bound& gen_params, Var x_target, Var z) {
  ad::Bound frozen;
  frozen.names = theta.names;
  for (const Var& v : theta.vars) frozen.vars.push_back(ad::detach(v));
  const Var real_phi = nets::forward_classifier(cls, frozen, x_target).phi;
  const Var fake_phi = nets::forward_classifier(cls, frozen, nets::forward_generator(gen, gen_params, z)).phi;
  return feature_matching(real_phi, fake_phi);
}

Var entropy(Var logits) {
  const double rows = static_cast<double>(logits.value().rows());
  const Var plogp = ad::mul(ad::softmax(logits), ad::log_softmax(logits));
  return ad::scale(ad::sum(plogp), -1.0 / rows);
}

Var consistency_kl(Var clean_logits, Var perturbed_logits) {
  const double rows = static_cast<double>(clean_logits.value().rows());
  const Var p = ad::detach(ad::softmax(clean_logits));
  const Var log_p = ad::detach(ad::log_softmax(clean_logits));
  const Var log_q = ad::log_softmax(perturbed_logits);
  return ad::scale(ad::sum(ad::mul(p, ad::sub(log_p, log_q))), 1.0 / rows);
}

Tensor kl_divergence(const Tensor& p, const Tensor& q) {
  if (p.shape() != q.shape() || p.rank() != 2) {
    throw DimensionError("kl_divergence: shapes " + ad::shape_string(p.shape()) + " and " +
                         ad::shape_string(q.shape()));
  }
  const std::size_t B = p.rows(), C = p.cols();
  for (const Tensor* t : {&p, &q}) {
    for (std::size_t i = 0; i < B; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < C; ++j) {
        if ((*t)(i, j) < 0.0) throw ContractError("kl_divergence: negative probability");
        s += (*t)(i, j);
      }
      if (std::abs(s - 1.0) > 1e-9) {
        throw ContractError("kl_divergence: row " + std::to_string(i) + " sums to " +
                            std::to_string(s) + ", not 1");
      }
    }
  }
  const double lo = nets::kProbClamp, hi = 1.0 - nets::kProbClamp;
  std::vector<double> out(B, 0.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double pv = p(i, j);
      if (pv == 0.0) continue;
      out[i] += pv * (std::log(std::clamp(pv, lo, hi)) - std::log(std::clamp(q(i, j), lo, hi)));
    }
  }
  return Tensor({B}, std::move(out));
}

Tensor vat_perturbation(const nets::ClassifierModel& model, const Tensor& x, const VatConfig& cfg,
                        Rng& rng) {
  return vat_perturbation(model, x, nets::forward_classifier(model, x).logits, cfg, rng);
}

Tensor vat_perturbation(const nets::ClassifierModel& model, const Tensor& x,
                        const Tensor& clean_logits, const VatConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t B = x.rows(), n = x.cols();
  std::vector<double> start(B * n);
  for (double& v : start) v = rng.normal();
  Tensor random_dir(Tensor::unchecked, {B, n}, std::move(start));
  normalize_rows(random_dir, nullptr);

  Tensor d = random_dir;
  for (std::size_t it = 0; it < cfg.power_iterations; ++it) {
    ad::Tape tape;
    const ad::Bound p = ad::bind(tape, model.params, false);
    const Var probe = tape.variable(d);
    const Var input = ad::add(tape.constant(x), ad::scale(probe, cfg.xi));
    const Var logits = nets::forward_classifier(model, p, input).logits;
    // Summed rather than averaged: rows are independent and get normalized.
    const Var kl = ad::scale(consistency_kl(tape.constant(clean_logits), logits),
                             static_cast<double>(B));
    tape.backward(kl);
    Tensor g = tape.grad(probe);
    normalize_rows(g, &d);
    d = std::move(g);
  }
  for (double& v : d.values()) v *= cfg.epsilon;
  return d;
}

double loss_classification(const nets::ClassifierModel& model, const Tensor& x,
                           std::span<const int> labels) {
  const auto out = nets::forward_classifier(model, x);
  ad::Tape tape;
  return classification(tape.constant(out.logits), labels, model.num_classes).value().item();
}

double loss_domain(const nets::DiscriminatorModel& disc, const Tensor& feats_source,
                   const Tensor& feats_target) {
  if (feats_source.rows() != feats_target.rows()) {
    throw ContractError("loss_domain: source and target batches must have equal size");
  }
  ad::Tape tape;
  const ad::Bound p = ad::bind(tape, disc.params, false);
  const Var ds = nets::forward_discriminator(disc, p, tape.constant(feats_source));
  const Var dt = nets::forward_discriminator(disc, p, tape.constant(feats_target));
  return domain(ds, dt).value().item();
}

double loss_unsupervised(const nets::ClassifierModel& model, const Tensor& x_target,
                         const Tensor& x_generated) {
  ad::Tape tape;
  const Var lt = tape.constant(nets::forward_classifier(model, x_target).logits);
  const Var lg = tape.constant(nets::forward_classifier(model, x_generated).logits);
  return unsupervised(lt, lg, model.num_classes).value().item();
}

double loss_feature_matching(const nets::ClassifierModel& model, const nets::GeneratorModel& gen,
                             const Tensor& x_target, const Tensor& z) {
  if (x_target.rows() == 0 || z.rows() == 0) throw ContractError("feature matching needs samples");
  ad::Tape tape;
  const Var real = tape.constant(nets::forward_classifier(model, x_target).phi);
  const Var fake = tape.constant(nets::forward_classifier(model, nets::forward_generator(gen, z)).phi);
  return feature_matching(real, fake).value().item();
}

double loss_entropy(const nets::ClassifierModel& model, const Tensor& x) {
  ad::Tape tape;
  return entropy(tape.constant(nets::forward_classifier(model, x).logits)).value().item();
}

double loss_vat_at(const nets::ClassifierModel& model, const Tensor& x, const Tensor& r) {
  if (r.shape() != x.shape()) throw DimensionError("loss_vat: perturbation shape mismatch");
  Tensor shifted = x;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += r[i];
  ad::Tape tape;
  const Var clean = tape.constant(nets::forward_classifier(model, x).logits);
  const Var pert = tape.constant(nets::forward_classifier(model, shifted).logits);
  return consistency_kl(clean, pert).value().item();
}

double loss_vat(const nets::ClassifierModel& model, const Tensor& x, const VatConfig& cfg, Rng& rng) {
  const Tensor clean = nets::forward_classifier(model, x).logits;
  const Tensor r = vat_perturbation(model, x, clean, cfg, rng);
  return loss_vat_at(model, x, r);
}

}  // namespace gada::losses
