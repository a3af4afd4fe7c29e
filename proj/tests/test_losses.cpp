#include <gtest/gtest.h>

#include <cmath>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "data/dataset.hpp"
#include "losses/losses.hpp"
#include "nets/models.hpp"
#include "trainer/trainer.hpp"

using namespace gada;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using nets::Head;

namespace {

Tensor filled_rows(std::size_t rows, std::vector<double> row) {
  std::vector<double> v;
  for (std::size_t i = 0; i < rows; ++i) v.insert(v.end(), row.begin(), row.end());
  return Tensor::matrix(rows, row.size(), v);
}

nets::ClassifierModel classifier(std::size_t k, std::uint64_t seed) {
  return nets::ClassifierModel::create({{2, 8}, 0.1, Head::none}, {{8, 8, k + 1}, 0.1, Head::linear}, k, seed);
}

void zero_all(ad::ParamStore& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& v : p.entry(i).value.values()) v = 0.0;
}

double row_norm(const Tensor& t, std::size_t r) {
  double s = 0;
  for (std::size_t j = 0; j < t.cols(); ++j) s += t(r, j) * t(r, j);
  return std::sqrt(s);
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -2, double hi = 2) {
  Rng rng(seed);
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::matrix(r, c, v);
}

double scalar(Var v) { return v.value().item(); }

}  // namespace

TEST(Classification, ConfidentTrueClassGivesZero) {
  Tape t;
  const std::vector<int> y{1, 2};
  const Var logits = t.constant(Tensor::matrix({{100, 0, 0}, {0, 100, 0}}));
  EXPECT_NEAR(scalar(losses::classification(logits, y, 2)), 0.0, 1e-12);
}

TEST(Classification, UniformOverTenClasses) {
  Tape t;
  const std::vector<int> y{3, 7, 10};
  EXPECT_NEAR(scalar(losses::classification(t.constant(Tensor::zeros({3, 11})), y, 10)), std::log(10.0), 1e-12);
}

TEST(Classification, FakeClassLogitIsConditionedAway) {
  Tape t;
  std::vector<double> row(11, 0.0);
  row[10] = 1e3;
  const std::vector<int> y{4, 4};
  EXPECT_NEAR(scalar(losses::classification(t.constant(filled_rows(2, row)), y, 10)), std::log(10.0), 1e-12);
}

TEST(Classification, RejectsFakeOrOutOfRangeLabels) {
  Tape t;
  const Var logits = t.constant(Tensor::zeros({1, 3}));
  EXPECT_THROW(losses::classification(logits, std::vector<int>{3}, 2), ContractError);
  EXPECT_THROW(losses::classification(logits, std::vector<int>{0}, 2), ContractError);
  EXPECT_THROW(losses::classification(logits, std::vector<int>{1, 1}, 2), DimensionError);
}

TEST(Domain, HalfEverywhere) {
  Tape t;
  const Var d = t.constant(Tensor::filled({4, 1}, 0.5));
  EXPECT_NEAR(scalar(losses::domain(d, d)), -2.0 * std::log(2.0), 1e-12);
}

TEST(Domain, ClampFloorValues) {
  Tape t;
  const double lo = nets::kProbClamp, hi = 1.0 - nets::kProbClamp;
  const Var src_lo = t.constant(Tensor::filled({2, 1}, lo));
  const Var src_hi = t.constant(Tensor::filled({2, 1}, hi));
  const Var tgt_lo = t.constant(Tensor::filled({2, 1}, lo));
  const Var tgt_hi = t.constant(Tensor::filled({2, 1}, hi));
  // Both expectations at the clamp floor.
  EXPECT_NEAR(scalar(losses::domain(src_lo, tgt_hi)), 2.0 * std::log(1e-7), 1e-6);
  EXPECT_NEAR(scalar(losses::domain(src_hi, tgt_hi)), std::log(hi) + std::log(1e-7), 1e-6);
  EXPECT_NEAR(scalar(losses::domain(src_hi, tgt_lo)), 2.0 * std::log(hi), 1e-12);
}

TEST(Domain, ModelLevelNeedsEqualBatches) {
  const auto d = nets::DiscriminatorModel::create({{3, 4, 1}, 0.1, Head::sigmoid}, nets::DiscTap::features, 1);
  EXPECT_THROW(losses::loss_domain(d, Tensor::zeros({2, 3}), Tensor::zeros({3, 3})), ContractError);
  auto z = d;
  zero_all(z.params);
  EXPECT_NEAR(losses::loss_domain(z, random_matrix(5, 3, 1), random_matrix(5, 3, 2)), -2 * std::log(2.0), 1e-12);
}

TEST(Unsupervised, OptimumIsZero) {
  Tape t;
  const Var real = t.constant(Tensor::matrix({{50, 0, -50}}));
  const Var fake = t.constant(Tensor::matrix({{-50, -50, 50}}));
  // Both terms sit at the probability clamp, each contributing -ln(1 - 1e-7).
  EXPECT_NEAR(scalar(losses::unsupervised(real, fake, 2)), -2 * std::log1p(-1e-7), 1e-12);
}

TEST(Unsupervised, ZeroLogitsTenClasses) {
  Tape t;
  const Var z = t.constant(Tensor::zeros({3, 11}));
  const double expected = -std::log(10.0 / 11.0) - std::log(1.0 / 11.0);
  EXPECT_NEAR(scalar(losses::unsupervised(z, z, 10)), expected, 1e-12);
  EXPECT_NEAR(expected, 2.49321, 1e-5);
}

TEST(Unsupervised, SwappedAtFullConfidenceHitsClampTwice) {
  Tape t;
  const Var real = t.constant(Tensor::matrix({{-500, -500, 500}}));
  const Var fake = t.constant(Tensor::matrix({{500, 0, -500}}));
  EXPECT_NEAR(scalar(losses::unsupervised(real, fake, 2)), -2.0 * std::log(1e-7), 1e-6);
}

TEST(FeatureMatching, Examples) {
  Tape t;
  const Var a = t.constant(Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_EQ(scalar(losses::feature_matching(a, a)), 0.0);
  const Var shifted = t.constant(Tensor::matrix({{4, 6}, {6, 8}}));
  EXPECT_NEAR(scalar(losses::feature_matching(a, shifted)), 5.0, 1e-12);
  EXPECT_NEAR(scalar(losses::feature_matching(shifted, a)), 5.0, 1e-12);
  const Var x = t.constant(Tensor::matrix({{1, -1, 2}}));
  const Var y = t.constant(Tensor::matrix({{0, 1, 0}}));
  EXPECT_NEAR(scalar(losses::feature_matching(x, y)), 3.0, 1e-12);
}

TEST(FeatureMatching, IdenticalBatchesThroughNetworks) {
  const auto cls = classifier(3, 4);
  const auto gen = nets::GeneratorModel::create({{3, 8, 2}, 0.1, Head::tanh}, 5);
  const Tensor z = random_matrix(6, 3, 7);
  const Tensor x = nets::forward_generator(gen, z);
  EXPECT_NEAR(losses::loss_feature_matching(cls, gen, x, z), 0.0, 1e-12);
}

TEST(Entropy, Examples) {
  Tape t;
  EXPECT_NEAR(scalar(losses::entropy(t.constant(Tensor::zeros({2, 11})))), std::log(11.0), 1e-9);
  EXPECT_NEAR(scalar(losses::entropy(t.constant(Tensor::zeros({2, 3})))), std::log(3.0), 1e-9);
  EXPECT_NEAR(scalar(losses::entropy(t.constant(Tensor::matrix({{800, 0, 0}})))), 0.0, 1e-9);
}

TEST(Entropy, BoundedByLogCount) {
  Tape t;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const double e = scalar(losses::entropy(t.constant(random_matrix(5, 4, s, -6, 6))));
    EXPECT_GE(e, 0.0);
    EXPECT_LE(e, std::log(4.0) + 1e-9);
  }
}

TEST(Kl, Examples) {
  EXPECT_NEAR(losses::kl_divergence(Tensor::matrix({{1, 0}}), Tensor::matrix({{0.5, 0.5}}))[0], std::log(2.0), 1e-6);
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  EXPECT_NEAR(losses::kl_divergence(Tensor::matrix({{0.5, 0.5}}), Tensor::matrix({{0.25, 0.75}}))[0], expected,
              1e-12);
  EXPECT_NEAR(expected, 0.143841, 1e-6);
  const Tensor p = Tensor::matrix({{0.2, 0.3, 0.5}, {0.9, 0.05, 0.05}});
  const Tensor kl = losses::kl_divergence(p, p);
  EXPECT_LE(std::abs(kl[0]), 1e-12);
  EXPECT_LE(std::abs(kl[1]), 1e-12);
}

TEST(Kl, RejectsUnnormalizedRows) {
  EXPECT_THROW(losses::kl_divergence(Tensor::matrix({{0.5, 0.6}}), Tensor::matrix({{0.5, 0.5}})), ContractError);
  EXPECT_THROW(losses::kl_divergence(Tensor::matrix({{0.5, 0.5}}), Tensor::matrix({{1, 0, 0}})), DimensionError);
}

TEST(ConsistencyKl, SameLogitsGiveZero) {
  Tape t;
  const Var l = t.constant(random_matrix(4, 5, 3));
  EXPECT_LE(std::abs(scalar(losses::consistency_kl(l, l))), 1e-12);
}

TEST(Vat, RowsHaveNormEpsilon) {
  const auto cls = classifier(3, 2);
  const Tensor x = random_matrix(16, 2, 3);
  Rng rng(9);
  losses::VatConfig cfg;
  cfg.epsilon = 0.37;
  const Tensor r = losses::vat_perturbation(cls, x, cfg, rng);
  for (std::size_t i = 0; i < r.rows(); ++i) EXPECT_NEAR(row_norm(r, i), 0.37, 1e-9);
}

TEST(Vat, ConstantClassifierFallsBackToRandomDirection) {
  auto cls = classifier(2, 2);
  zero_all(cls.params);
  const Tensor x = random_matrix(6, 2, 3);
  Rng rng(4);
  const Tensor r = losses::vat_perturbation(cls, x, {}, rng);
  for (std::size_t i = 0; i < r.rows(); ++i) EXPECT_NEAR(row_norm(r, i), losses::VatConfig{}.epsilon, 1e-9);
  Rng rng2(4);
  EXPECT_EQ(losses::loss_vat(cls, x, {}, rng2), 0.0);
}

TEST(Vat, ZeroEpsilonGivesZero) {
  const auto cls = classifier(2, 2);
  const Tensor x = random_matrix(6, 2, 3);
  losses::VatConfig cfg;
  cfg.epsilon = 0.0;
  Rng rng(4);
  const Tensor r = losses::vat_perturbation(cls, x, cfg, rng);
  for (double v : r.values()) EXPECT_EQ(v, 0.0);
  Rng rng2(4);
  EXPECT_EQ(losses::loss_vat(cls, x, cfg, rng2), 0.0);
}

TEST(Vat, ConfigValidation) {
  losses::VatConfig cfg;
  cfg.xi = 0;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = {};
  cfg.power_iterations = 0;
  EXPECT_THROW(cfg.validate(), ContractError);
  cfg = {};
  cfg.epsilon = -1;
  EXPECT_THROW(cfg.validate(), ContractError);
}

TEST(Vat, PerturbationApproachesWorstCaseDirection) {
  // Short source-only training on two moons, then the KL reached by r is
  // compared with a random direction and with a 360-direction brute-force
  // maximum of equal norm. The radius is small so the local quadratic model holds.
  data::ShiftSpec spec;
  spec.angle_deg = 0;
  const auto ds = data::generate(spec);
  train::HyperParams hp;
  hp.steps = 400;
  hp.eval_interval = 400;
  hp.toggles = {false, false, false, false};
  const auto state = train::train(hp, ds);
  const auto& cls = state.nets.classifier;
  std::vector<std::size_t> idx(200);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor x = ad::gather_rows(ds.test_x, idx);
  const double eps = 0.01;

  auto probs = [&](const Tensor& in) {
    Tape t;
    return ad::softmax(t.constant(nets::forward_classifier(cls, in).logits)).value();
  };
  const Tensor p = probs(x);
  auto total_kl = [&](const Tensor& d) {
    Tensor moved = x;
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += d[i];
    return losses::kl_divergence(p, probs(moved));
  };
  auto at_angle = [&](auto angle_of_row) {
    Tensor d = Tensor::zeros({x.rows(), 2});
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double a = angle_of_row(i);
      d(i, 0) = eps * std::cos(a);
      d(i, 1) = eps * std::sin(a);
    }
    return d;
  };
  auto sum = [](const Tensor& t) {
    double s = 0;
    for (double v : t.values()) s += v;
    return s;
  };

  Tensor best = Tensor::zeros({x.rows()});
  for (int k = 0; k < 360; ++k) {
    const Tensor kl = total_kl(at_angle([&](std::size_t) { return k * M_PI / 180; }));
    for (std::size_t i = 0; i < x.rows(); ++i) best[i] = std::max(best[i], kl[i]);
  }
  Rng dir_rng(18);
  const double random_kl = sum(total_kl(at_angle([&](std::size_t) { return dir_rng.uniform(0, 2 * M_PI); })));

  losses::VatConfig one;
  one.epsilon = eps;
  Rng rng1(17);
  const double one_kl = sum(total_kl(losses::vat_perturbation(cls, x, one, rng1)));
  EXPECT_GT(one_kl, 1.5 * random_kl);

  losses::VatConfig five = one;
  five.power_iterations = 5;
  Rng rng5(17);
  const double five_kl = sum(total_kl(losses::vat_perturbation(cls, x, five, rng5)));
  EXPECT_GE(five_kl, one_kl);
  EXPECT_GE(five_kl, 0.9 * sum(best)) << five_kl << " vs brute force " << sum(best);
}

TEST(Losses, ShiftInvarianceOfLogits) {
  // Adding a constant to every logit of a row leaves each loss unchanged.
  const Tensor logits = random_matrix(4, 5, 21);
  Tensor shifted = logits;
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) shifted(r, c) += 3.0 * static_cast<double>(r) - 4.0;
  const std::vector<int> y{1, 4, 2, 3};
  Tape t;
  const Var a = t.constant(logits), b = t.constant(shifted);
  EXPECT_NEAR(scalar(losses::classification(a, y, 4)), scalar(losses::classification(b, y, 4)), 1e-9);
  EXPECT_NEAR(scalar(losses::entropy(a)), scalar(losses::entropy(b)), 1e-9);
  EXPECT_NEAR(scalar(losses::unsupervised(a, a, 4)), scalar(losses::unsupervised(b, b, 4)), 1e-9);
  EXPECT_NEAR(scalar(losses::consistency_kl(a, t.constant(random_matrix(4, 5, 3)))),
              scalar(losses::consistency_kl(b, t.constant(random_matrix(4, 5, 3)))), 1e-9);
}

TEST(Losses, NonNegativeOnRandomNetworks) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto cls = classifier(3, s);
    const Tensor x = random_matrix(8, 2, 100 + s);
    const std::vector<int> y{1, 2, 3, 1, 2, 3, 1, 2};
    EXPECT_GE(losses::loss_classification(cls, x, y), 0.0);
    EXPECT_GE(losses::loss_unsupervised(cls, x, random_matrix(8, 2, 200 + s)), 0.0);
    EXPECT_GE(losses::loss_entropy(cls, x), 0.0);
    Rng rng(s);
    EXPECT_GE(losses::loss_vat(cls, x, {}, rng), 0.0);
  }
}

TEST(GeneratorObjective, BlocksClassifierGradient) {
  const auto cls = classifier(3, 8);
  const auto gen = nets::GeneratorModel::create({{3, 8, 2}, 0.1, Head::tanh}, 9);
  Tape t;
  const ad::Bound theta = ad::bind(t, cls.params, true);
  const ad::Bound g = ad::bind(t, gen.params, true);
  const Var l = losses::generator_objective(cls, theta, gen, g, t.constant(random_matrix(6, 2, 1)),
                                            t.constant(random_matrix(6, 3, 2)));
  const ad::ParamStore gt = ad::backward(l, theta);
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (double v : gt.entry(i).value.values()) EXPECT_EQ(v, 0.0);
  const ad::ParamStore gg = ad::backward(l, g);
  double mass = 0;
  for (std::size_t i = 0; i < gg.size(); ++i)
    for (double v : gg.entry(i).value.values()) mass += std::abs(v);
  EXPECT_GT(mass, 0.0);
}

TEST(LossWeights, Validation) {
  losses::LossWeights w;
  w.lambda_u = -1;
  EXPECT_THROW(w.validate(), ContractError);
  w = {};
  EXPECT_NO_THROW(w.validate());
}
