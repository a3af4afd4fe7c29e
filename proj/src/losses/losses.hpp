#ifndef GADA_LOSSES_LOSSES_HPP
#define GADA_LOSSES_LOSSES_HPP

#include <cstddef>
#include <span>

#include "autodiff/tape.hpp"
#include "common/rng.hpp"
#include "nets/models.hpp"

// Every loss here is a scalar to minimize. Class labels are 1..K; column
// K (0-based) of the logits is the fictitious class.
namespace gada::losses {

struct VatConfig {
  double epsilon = 0.1;
  double xi = 1e-6;
  std::size_t power_iterations = 1;

  void validate() const;
  bool operator==(const VatConfig&) const = default;
};

struct LossWeights {
  double lambda_d = 1e-2;
  double lambda_s = 1.0;
  double lambda_t = 1e-2;
  double lambda_u = 1.0;

  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

void check_labels(std::span<const int> labels, std::size_t num_classes);

// ---- tape-level building blocks ---------------------------------------------

// Mean of -log softmax restricted to the first K logits at the true label.
ad::Var classification(ad::Var logits, std::span<const int> labels, std::size_t num_classes);

// mean_S[log D] + mean_T[log(1 - D)] on clamped discriminator outputs.
ad::Var domain(ad::Var d_source, ad::Var d_target);

// -mean_T[log P(y <= K | x)] - mean_gen[log P(y = K+1 | x)], probabilities
// clamped before the log.
ad::Var unsupervised(ad::Var logits_target, ad::Var logits_generated, std::size_t num_classes);

// || mean(phi_real) - mean(phi_generated) ||_2 with the real statistics
// detached.
ad::Var feature_matching(ad::Var phi_real, ad::Var phi_generated);

// Feature matching as the generator is trained on it: the classifier
// parameters enter as constants, so no gradient reaches theta_g or theta_h
// whether or not `theta` was bound trainable.
ad::Var generator_objective(const nets::ClassifierModel& cls, const ad::Bound& theta,
                            const nets::GeneratorModel& gen, const ad::Bound& gen_params, ad::Var x_target,
                            ad::Var z);

// Mean Shannon entropy of the full (K+1)-way softmax.
ad::Var entropy(ad::Var logits);

// Mean KL(softmax(clean) || softmax(perturbed)); the clean side is detached.
ad::Var consistency_kl(ad::Var clean_logits, ad::Var perturbed_logits);

// ---- model-level evaluations --------------------------------------------------

// Row-wise KL(p || q) for probability rows; logs use clamped entries.
ad::Tensor kl_divergence(const ad::Tensor& p, const ad::Tensor& q);

// Adversarial direction of norm epsilon per row, by power iteration on the
// KL of the prediction at x against x + xi*d. Rows whose probe gradient
// vanishes keep their random start direction.
ad::Tensor vat_perturbation(const nets::ClassifierModel& model, const ad::Tensor& x,
                            const VatConfig& cfg, Rng& rng);
// Same, with precomputed clean logits.
ad::Tensor vat_perturbation(const nets::ClassifierModel& model, const ad::Tensor& x,
                            const ad::Tensor& clean_logits, const VatConfig& cfg, Rng& rng);

double loss_classification(const nets::ClassifierModel& model, const ad::Tensor& x,
                           std::span<const int> labels);
double loss_domain(const nets::DiscriminatorModel& disc, const ad::Tensor& feats_source,
                   const ad::Tensor& feats_target);
double loss_unsupervised(const nets::ClassifierModel& model, const ad::Tensor& x_target,
                         const ad::Tensor& x_generated);
double loss_feature_matching(const nets::ClassifierModel& model, const nets::GeneratorModel& gen,
                             const ad::Tensor& x_target, const ad::Tensor& z);
double loss_entropy(const nets::ClassifierModel& model, const ad::Tensor& x);
double loss_vat(const nets::ClassifierModel& model, const ad::Tensor& x, const VatConfig& cfg,
                Rng& rng);
// VAT loss at a given perturbation.
double loss_vat_at(const nets::ClassifierModel& model, const ad::Tensor& x, const ad::Tensor& r);

}  // namespace gada::losses

#endif  // GADA_LOSSES_LOSSES_HPP
