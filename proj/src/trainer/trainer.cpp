#include "trainer/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "losses/losses.hpp"

namespace gada::train {

using ad::Tensor;
using ad::Var;

namespace {

constexpr std::uint64_t kClassifierSalt = 0xC1A5;
constexpr std::uint64_t kDiscriminatorSalt = 0xD15C;
constexpr std::uint64_t kGeneratorSalt = 0x6E4E;

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch sample(const Tensor& x, const std::vector<int>* y, std::size_t m, std::uint64_t seed,
             Stream stream, std::uint64_t step) {
  const data::BatchSampler sampler(x.rows(), m, seed, static_cast<std::uint64_t>(stream));
  const auto idx = sampler.batch(step);
  Batch b;
  b.x = ad::gather_rows(x, idx);
  if (y) {
    b.y.reserve(idx.size());
    for (std::size_t i : idx) b.y.push_back((*y)[i]);
  }
  return b;
}

Tensor plus(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

double checked(double v, const char* name, std::uint64_t step) {
  if (!std::isfinite(v)) {
    throw NumericError(std::string("non-finite loss ") + name + " at step " + std::to_string(step));
  }
  return v;
}

void check_params(const ad::ParamStore& p, const char* phase, std::uint64_t step) {
  for (const auto& e : p) {
    if (!e.value.all_finite()) {
      throw NumericError(std::string("non-finite parameter ") + e.name + " after " + phase +
                         " at step " + std::to_string(step));
    }
  }
}

}  // namespace

NetBundle NetBundle::create(const HyperParams& hp, std::size_t input_dim, std::size_t num_classes) {
  NetBundle b;
  b.classifier = nets::ClassifierModel::create(g_spec(hp.net, input_dim), h_spec(hp.net, num_classes),
                                               num_classes, derive_seed(hp.seed, kClassifierSalt),
                                               hp.net.phi_tap);
  b.discriminator = nets::DiscriminatorModel::create(d_spec(hp.net, num_classes), hp.net.disc_tap,
                                                     derive_seed(hp.seed, kDiscriminatorSalt));
  b.generator = nets::GeneratorModel::create(gen_spec(hp.net, input_dim),
                                             derive_seed(hp.seed, kGeneratorSalt));
  b.classifier_opt = nets::AdamState::create(b.classifier.params, hp.adam(hp.lr_cls));
  b.discriminator_opt = nets::AdamState::create(b.discriminator.params, hp.adam(hp.lr_disc));
  b.generator_opt = nets::AdamState::create(b.generator.params, hp.adam(hp.lr_gen));
  return b;
}

TrainState TrainState::create(const HyperParams& hp, const data::DomainShiftDataset& ds) {
  hp.validate();
  ds.validate();
  TrainState s;
  s.hp = hp;
  s.config_echo = to_key_values(hp);
  s.num_classes = ds.num_classes;
  s.input_dim = ds.dim();
  s.nets = NetBundle::create(hp, ds.dim(), ds.num_classes);
  return s;
}

Tensor noise_batch(std::size_t rows, std::size_t dim, std::uint64_t seed, Stream stream, std::uint64_t step) {
  Rng rng(seed, static_cast<std::uint64_t>(stream), step);
  std::vector<double> z(rows * dim);
  for (double& v : z) v = rng.normal();
  return Tensor({rows, dim}, std::move(z));
}

data::DomainShiftDataset prepare(const data::DomainShiftDataset& ds, const HyperParams& hp) {
  data::DomainShiftDataset out = ds;
  if (hp.instance_norm) data::instance_normalize(out);
  return out;
}

Evaluation evaluate(const nets::ClassifierModel& model, const Tensor& x, const std::vector<int>& y) {
  if (x.rows() == 0 || y.empty()) throw ContractError("evaluate: empty test set");
  if (x.rows() != y.size()) throw ContractError("evaluate: label count does not match rows");
  const std::size_t k = model.num_classes;
  losses::check_labels(y, k);
  const Tensor logits = nets::forward_classifier(model, x).logits;
  Evaluation ev;
  ev.confusion.assign(k, std::vector<std::uint64_t>(k, 0));
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    const auto truth = static_cast<std::size_t>(y[i] - 1);
    ++ev.confusion[truth][best];
    if (truth == best) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
  return ev;
}

Evaluation evaluate(const TrainState& state, const data::DomainShiftDataset& ds) {
  const auto prepared = prepare(ds, state.hp);
  return evaluate(state.nets.classifier, prepared.test_x, prepared.test_y);
}

void train_step(TrainState& state, const data::DomainShiftDataset& ds) {
  const HyperParams& hp = state.hp;
  const Toggles& on = hp.toggles;
  const losses::LossWeights& w = hp.weights;
  NetBundle& nb = state.nets;
  const std::size_t m = hp.batch;
  const std::size_t k = state.num_classes;
  const std::uint64_t step = state.step;
  const std::uint64_t seed = hp.seed;
  auto& tr = state.traces;

  // S1: classifier update over theta = (theta_g, theta_h).
  {
    ad::Tape tape;
    const ad::Bound theta = ad::bind(tape, nb.classifier.params, true);
    const Batch src = sample(ds.source_x, &ds.source_y, m, seed, Stream::s1_source, step);
    const auto out_s = nets::forward_classifier(nb.classifier, theta, tape.constant(src.x));

    const Var l_c = losses::classification(out_s.logits, src.y, k);
    tr["s1.l_c"].push_back(checked(l_c.value().item(), "L_c", step));
    Var objective = l_c;

    const bool need_target = on.domain || on.entropy || on.vat || on.unsupervised;
    Batch tgt;
    nets::ClassifierOutput out_t;
    if (need_target) {
      tgt = sample(ds.target_x, nullptr, m, seed, Stream::s1_target, step);
      out_t = nets::forward_classifier(nb.classifier, theta, tape.constant(tgt.x));
    }

    if (on.domain) {
      const ad::Bound disc = ad::bind(tape, nb.discriminator.params, false);
      const Var ds_src = nets::forward_discriminator(nb.discriminator, disc,
                                                     nets::disc_input(nb.discriminator, out_s));
      const Var ds_tgt = nets::forward_discriminator(nb.discriminator, disc,
                                                     nets::disc_input(nb.discriminator, out_t));
      const Var l_d = losses::domain(ds_src, ds_tgt);
      tr["s1.l_d"].push_back(checked(l_d.value().item(), "L_d", step));
      // theta_g ascends L_d while the discriminator descends it in S2.
      objective = ad::sub(objective, ad::scale(l_d, w.lambda_d));
    }

    if (on.unsupervised) {
      const Tensor z = noise_batch(m, nb.generator.noise_dim(), seed, Stream::s1_noise, step);
      const Tensor x_gen = nets::forward_generator(nb.generator, z);
      const auto out_g = nets::forward_classifier(nb.classifier, theta, tape.constant(x_gen));
      const Var l_u = losses::unsupervised(out_t.logits, out_g.logits, k);
      tr["s1.l_u"].push_back(checked(l_u.value().item(), "L_u", step));
      objective = ad::add(objective, ad::scale(l_u, w.lambda_u));
    }

    if (on.vat) {
      Rng rng_s(seed, static_cast<std::uint64_t>(Stream::s1_vat_source), step);
      const Tensor r_s =
          losses::vat_perturbation(nb.classifier, src.x, out_s.logits.value(), hp.vat, rng_s);
      const auto pert_s = nets::forward_classifier(nb.classifier, theta, tape.constant(plus(src.x, r_s)));
      const Var l_vs = losses::consistency_kl(out_s.logits, pert_s.logits);
      tr["s1.l_v_source"].push_back(checked(l_vs.value().item(), "L_v(source)", step));
      objective = ad::add(objective, ad::scale(l_vs, w.lambda_s));

      Rng rng_t(seed, static_cast<std::uint64_t>(Stream::s1_vat_target), step);
      const Tensor r_t =
          losses::vat_perturbation(nb.classifier, tgt.x, out_t.logits.value(), hp.vat, rng_t);
      const auto pert_t = nets::forward_classifier(nb.classifier, theta, tape.constant(plus(tgt.x, r_t)));
      const Var l_vt = losses::consistency_kl(out_t.logits, pert_t.logits);
      tr["s1.l_v_target"].push_back(checked(l_vt.value().item(), "L_v(target)", step));
      objective = ad::add(objective, ad::scale(l_vt, w.lambda_t));
    }

    if (on.entropy) {
      const Var l_e = losses::entropy(out_t.logits);
      tr["s1.l_e"].push_back(checked(l_e.value().item(), "L_e", step));
      objective = ad::add(objective, ad::scale(l_e, w.lambda_t));
    }

    tr["s1.objective"].push_back(checked(objective.value().item(), "S1 objective", step));
    const ad::ParamStore grads = ad::backward(objective, theta);
    nets::adam_step(nb.classifier.params, grads, nb.classifier_opt);
    check_params(nb.classifier.params, "S1", step);
  }

  // S2: discriminator update on fresh batches.
  if (on.domain) {
    const Batch src = sample(ds.source_x, nullptr, m, seed, Stream::s2_source, step);
    const Batch tgt = sample(ds.target_x, nullptr, m, seed, Stream::s2_target, step);
    const auto fs = nets::forward_classifier(nb.classifier, src.x);
    const auto ft = nets::forward_classifier(nb.classifier, tgt.x);
    const bool on_features = nb.discriminator.tap == nets::DiscTap::features;
    ad::Tape tape;
    const ad::Bound disc = ad::bind(tape, nb.discriminator.params, true);
    const Var d_src = nets::forward_discriminator(nb.discriminator, disc,
                                                  tape.constant(on_features ? fs.features : fs.logits));
    const Var d_tgt = nets::forward_discriminator(nb.discriminator, disc,
                                                  tape.constant(on_features ? ft.features : ft.logits));
    const Var l_d = losses::domain(d_src, d_tgt);
    tr["s2.l_d"].push_back(checked(l_d.value().item(), "L_d (discriminator)", step));
    nets::adam_step(nb.discriminator.params, ad::backward(l_d, disc), nb.discriminator_opt);
    check_params(nb.discriminator.params, "S2", step);
  }

  // S3: feature-matching generator update, target statistics only.
  if (on.unsupervised) {
    const Tensor z = noise_batch(m, nb.generator.noise_dim(), seed, Stream::s3_noise, step);
    const Batch tgt = sample(ds.target_x, nullptr, m, seed, Stream::s3_target, step);
    ad::Tape tape;
    const ad::Bound gen = ad::bind(tape, nb.generator.params, true);
    const ad::Bound theta = ad::bind(tape, nb.classifier.params, false);
    const Var l_g = losses::generator_objective(nb.classifier, theta, nb.generator, gen,
                                                tape.constant(tgt.x), tape.constant(z));
    tr["s3.l_g"].push_back(checked(l_g.value().item(), "L_g", step));
    nets::adam_step(nb.generator.params, ad::backward(l_g, gen), nb.generator_opt);
    check_params(nb.generator.params, "S3", step);
  }

  ++state.step;
}

namespace {

void record(TrainState& state, const data::DomainShiftDataset& prepared, const char* phase,
            std::uint64_t step) {
  Evaluation ev = evaluate(state.nets.classifier, prepared.test_x, prepared.test_y);
  ev.step = step;
  ev.phase = phase;
  state.evaluations.push_back(std::move(ev));
}

bool recorded(const TrainState& state, const char* phase, std::uint64_t step) {
  return !state.evaluations.empty() && state.evaluations.back().phase == phase &&
         state.evaluations.back().step == step;
}

}  // namespace

void resume(TrainState& state, const data::DomainShiftDataset& ds) {
  const auto prepared = prepare(ds, state.hp);
  prepared.validate();
  if (prepared.source_x.rows() < state.hp.batch || prepared.target_x.rows() < state.hp.batch) {
    throw ContractError("dataset needs at least M source and M target samples");
  }
  if (prepared.dim() != state.input_dim || prepared.num_classes != state.num_classes) {
    throw DimensionError("dataset does not match the model's input width or class count");
  }
  if (state.step == 0 && !recorded(state, "train", 0)) record(state, prepared, "train", 0);
  while (state.step < state.hp.steps) {
    train_step(state, prepared);
    if (state.step % state.hp.eval_interval == 0) record(state, prepared, "train", state.step);
  }
  if (!recorded(state, "train", state.step)) record(state, prepared, "train", state.step);
}

TrainState train(const HyperParams& hp, const data::DomainShiftDataset& ds) {
  TrainState state = TrainState::create(hp, ds);
  resume(state, ds);
  return state;
}

void dirtt_step(TrainState& state, const data::DomainShiftDataset& ds, const HyperParams& hp) {
  NetBundle& nb = state.nets;
  const std::uint64_t step = state.dirt_step;
  if (!state.teacher || step % hp.dirt_refresh_interval == 0) state.teacher = nb.classifier.params;
  // Training moments would turn the jump in gradient scale at large beta into a step far above lr.
  if (step == 0) nb.classifier_opt = nets::AdamState::create(nb.classifier.params, hp.adam(hp.lr_cls));

  const Batch tgt = sample(ds.target_x, nullptr, hp.batch, hp.seed, Stream::dirt_target, step);
  nets::ClassifierModel teacher = nb.classifier;
  teacher.params = *state.teacher;
  const Tensor teacher_logits = nets::forward_classifier(teacher, tgt.x).logits;

  ad::Tape tape;
  const ad::Bound theta = ad::bind(tape, nb.classifier.params, true);
  const auto out = nets::forward_classifier(nb.classifier, theta, tape.constant(tgt.x));
  Rng rng(hp.seed, static_cast<std::uint64_t>(Stream::dirt_vat), step);
  const Tensor r = losses::vat_perturbation(nb.classifier, tgt.x, out.logits.value(), hp.vat, rng);
  const auto pert = nets::forward_classifier(nb.classifier, theta, tape.constant(plus(tgt.x, r)));

  const Var l_v = losses::consistency_kl(out.logits, pert.logits);
  const Var l_e = losses::entropy(out.logits);
  const Var kl = losses::consistency_kl(tape.constant(teacher_logits), out.logits);
  const Var objective = ad::add(ad::scale(ad::add(l_v, l_e), hp.weights.lambda_t),
                                ad::scale(kl, hp.dirt_beta));
  auto& tr = state.traces;
  tr["dirt.l_v"].push_back(checked(l_v.value().item(), "L_v (refine)", step));
  tr["dirt.l_e"].push_back(checked(l_e.value().item(), "L_e (refine)", step));
  tr["dirt.kl_teacher"].push_back(checked(kl.value().item(), "teacher KL", step));
  tr["dirt.objective"].push_back(checked(objective.value().item(), "refine objective", step));
  nets::adam_step(nb.classifier.params, ad::backward(objective, theta), nb.classifier_opt);
  check_params(nb.classifier.params, "refine", step);
  ++state.dirt_step;
}

void dirtt_refine(TrainState& state, const data::DomainShiftDataset& ds, const HyperParams& hp) {
  hp.validate();
  const auto prepared = prepare(ds, state.hp);
  if (prepared.target_x.rows() < hp.batch) throw ContractError("refinement needs at least M target samples");
  const std::uint64_t start = state.dirt_step;
  const std::uint64_t end = start + hp.dirt_steps;
  while (state.dirt_step < end) {
    dirtt_step(state, prepared, hp);
    if (state.dirt_step % hp.eval_interval == 0) {
      record(state, prepared, "refine", state.step + state.dirt_step);
    }
  }
  if (hp.dirt_steps > 0 && !recorded(state, "refine", state.step + state.dirt_step)) {
    record(state, prepared, "refine", state.step + state.dirt_step);
  }
}

MetricsReport report(const TrainState& state) {
  MetricsReport r;
  r.evaluations = state.evaluations;
  if (!state.evaluations.empty()) r.final_eval = state.evaluations.back();
  return r;
}

}  // namespace gada::train
