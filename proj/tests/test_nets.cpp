#include <gtest/gtest.h>

#include <cmath>

#include "common/error.hpp"
#include "nets/adam.hpp"
#include "nets/mlp.hpp"
#include "nets/models.hpp"

using namespace gada;
using ad::Tensor;
using nets::Head;
using nets::NetSpec;
using nets::init_mlp;

namespace {

void zero_all(ad::ParamStore& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& v : p.entry(i).value.values()) v = 0.0;
}

nets::ClassifierModel small_classifier(std::size_t k, std::uint64_t seed = 1) {
  return nets::ClassifierModel::create({{2, 6}, 0.1, Head::none}, {{6, 5, k + 1}, 0.1, Head::linear}, k, seed);
}

}  // namespace

TEST(Mlp, InitNamesShapesAndZeroBiases) {
  ad::ParamStore p;
  init_mlp({{3, 4, 2}, 0.1, Head::linear}, "g", 5, p);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p.entry(0).name, "g/W0");
  EXPECT_EQ(p.at("g/W0").shape(), (ad::Shape{3, 4}));
  EXPECT_EQ(p.at("g/W1").shape(), (ad::Shape{4, 2}));
  EXPECT_EQ(p.at("g/b1"), Tensor::zeros({2}));
}

TEST(Mlp, InitIsDeterministicInSeed) {
  ad::ParamStore a, b, c;
  const NetSpec spec{{2, 8, 3}, 0.1, Head::linear};
  init_mlp(spec, "n", 42, a);
  init_mlp(spec, "n", 42, b);
  init_mlp(spec, "n", 43, c);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Mlp, InitWeightVarianceMatchesFanIn) {
  // 8 -> 5 layer, variance 2/8, over >= 10^4 draws.
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::uint64_t seed = 0; seed < 250; ++seed) {
    ad::ParamStore p;
    init_mlp({{8, 5}, 0.1, Head::linear}, "x", seed, p);
    for (double w : p.at("x/W0").values()) {
      sum += w;
      sq += w * w;
      ++n;
    }
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  EXPECT_GE(n, 10000u);
  EXPECT_NEAR(var, 0.25, 0.25 * 0.2);
}

TEST(Mlp, SpecValidation) {
  EXPECT_THROW((NetSpec{{3}, 0.1, Head::linear}.validate()), ContractError);
  EXPECT_THROW((NetSpec{{3, 0, 2}, 0.1, Head::linear}.validate()), ContractError);
  EXPECT_THROW((NetSpec{{3, 2}, 1.5, Head::linear}.validate()), ContractError);
  EXPECT_EQ(nets::parse_head("tanh"), Head::tanh);
  EXPECT_THROW(nets::parse_head("relu"), ConfigError);
}

TEST(Classifier, LogitsHaveKPlusOneColumns) {
  const auto m = small_classifier(2);
  const auto out = nets::forward_classifier(m, Tensor::matrix({{0.3, -0.2}}));
  EXPECT_EQ(out.logits.shape(), (ad::Shape{1, 3}));
  EXPECT_EQ(out.features.shape(), (ad::Shape{1, 6}));
  EXPECT_EQ(out.phi.shape(), (ad::Shape{1, 5}));
  EXPECT_EQ(m.phi_dim(), 5u);
}

TEST(Classifier, RejectsWrongOutputWidth) {
  EXPECT_THROW(nets::ClassifierModel::create({{2, 6}, 0.1, Head::none}, {{6, 5, 3}, 0.1, Head::linear}, 3, 1),
               ContractError);
  EXPECT_THROW(nets::ClassifierModel::create({{2, 6}, 0.1, Head::none}, {{5, 4}, 0.1, Head::linear}, 3, 1),
               DimensionError);
}

TEST(Classifier, InputWidthMismatch) {
  const auto m = small_classifier(2);
  EXPECT_THROW(nets::forward_classifier(m, Tensor::matrix({{1, 2, 3}})), DimensionError);
}

TEST(Classifier, ZeroWeightsGiveZeroLogits) {
  auto m = small_classifier(3);
  zero_all(m.params);
  const auto out = nets::forward_classifier(m, Tensor::matrix({{1, 2}, {-3, 4}}));
  for (double v : out.logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(Classifier, ForwardIsPure) {
  const auto m = small_classifier(2, 9);
  const Tensor x = Tensor::matrix({{0.1, 0.2}, {0.3, -0.4}});
  EXPECT_EQ(nets::forward_classifier(m, x).logits, nets::forward_classifier(m, x).logits);
}

TEST(Classifier, FeatureTapSelectsG) {
  const auto m = nets::ClassifierModel::create({{2, 6}, 0.1, Head::none}, {{6, 5, 3}, 0.1, Head::linear}, 2, 1,
                                               nets::PhiTap::features);
  const auto out = nets::forward_classifier(m, Tensor::matrix({{0.3, -0.2}}));
  EXPECT_EQ(out.phi, out.features);
}

TEST(Discriminator, ZeroWeightsGiveHalf) {
  auto d = nets::DiscriminatorModel::create({{4, 3, 1}, 0.1, Head::sigmoid}, nets::DiscTap::features, 3);
  zero_all(d.params);
  const Tensor out = nets::forward_discriminator(d, Tensor::matrix({{1, 2, 3, 4}, {0, 0, 0, 0}}));
  EXPECT_EQ(out.shape(), (ad::Shape{2, 1}));
  for (double v : out.values()) EXPECT_EQ(v, 0.5);
}

TEST(Discriminator, HugeLogitIsClamped) {
  auto d = nets::DiscriminatorModel::create({{1, 1}, 0.1, Head::sigmoid}, nets::DiscTap::features, 3);
  d.params.at("D/W0")[0] = 1000.0;
  const Tensor out = nets::forward_discriminator(d, Tensor::matrix({{1.0}, {-1.0}}));
  EXPECT_EQ(out[0], 1.0 - 1e-7);
  EXPECT_EQ(out[1], 1e-7);
}

TEST(Discriminator, MustEndInOneSigmoidUnit) {
  EXPECT_THROW(nets::DiscriminatorModel::create({{4, 2}, 0.1, Head::sigmoid}, nets::DiscTap::features, 1),
               ContractError);
  EXPECT_THROW(nets::DiscriminatorModel::create({{4, 1}, 0.1, Head::linear}, nets::DiscTap::features, 1),
               ContractError);
}

TEST(Generator, ZeroWeightsGiveZeros) {
  auto g = nets::GeneratorModel::create({{4, 8, 2}, 0.1, Head::tanh}, 2);
  zero_all(g.params);
  const Tensor out = nets::forward_generator(g, Tensor::matrix({{1, 2, 3, 4}}));
  EXPECT_EQ(out, Tensor::zeros({1, 2}));
}

TEST(Generator, OutputsBoundedAndDeterministic) {
  const auto g = nets::GeneratorModel::create({{3, 8, 2}, 0.1, Head::tanh}, 2);
  const Tensor z = Tensor::matrix({{5, -5, 5}, {0.1, 0.2, 0.3}});
  const Tensor a = nets::forward_generator(g, z);
  for (double v : a.values()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(a, nets::forward_generator(g, z));
  EXPECT_THROW(nets::GeneratorModel::create({{3, 2}, 0.1, Head::linear}, 2), ContractError);
}

TEST(Adam, ZeroGradientLeavesParams) {
  ad::ParamStore p;
  p.add("w", Tensor::vector({1.0, -2.0}));
  auto st = nets::AdamState::create(p, {});
  const auto before = p;
  nets::adam_step(p, p.zeros_like(), st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ad::ParamStore p;
  p.add("w", Tensor::scalar(1.0));
  ad::ParamStore g;
  g.add("w", Tensor::scalar(1.0));
  auto st = nets::AdamState::create(p, {0.1, 0.5, 0.999, 1e-8});
  nets::adam_step(p, g, st);
  // Bias-corrected moments are exactly g and g^2 on the first step.
  EXPECT_NEAR(p.at("w").item(), 1.0 - 0.1 * 1.0 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, ZeroRateKeepsParamsButUpdatesMoments) {
  ad::ParamStore p;
  p.add("w", Tensor::vector({1.0, 2.0}));
  ad::ParamStore g;
  g.add("w", Tensor::vector({0.5, -0.5}));
  auto st = nets::AdamState::create(p, {0.0, 0.5, 0.999, 1e-8});
  const auto before = p;
  nets::adam_step(p, g, st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.first_moment.at("w"), Tensor::vector({0.25, -0.25}));
}

TEST(Adam, MissingGradientKey) {
  ad::ParamStore p;
  p.add("w", Tensor::scalar(1.0));
  ad::ParamStore g;
  g.add("v", Tensor::scalar(1.0));
  auto st = nets::AdamState::create(p, {});
  EXPECT_THROW(nets::adam_step(p, g, st), ContractError);
}

TEST(Adam, IdenticalRunsMatch) {
  auto run = [] {
    ad::ParamStore p;
    p.add("w", Tensor::vector({0.3, -0.7, 1.1}));
    auto st = nets::AdamState::create(p, {0.01, 0.5, 0.999, 1e-8});
    for (int i = 0; i < 50; ++i) {
      ad::ParamStore g;
      Tensor gv = p.at("w");
      for (auto& v : gv.values()) v = 2 * v - 0.1 * i;  // gradient of a drifting quadratic
      g.add("w", gv);
      nets::adam_step(p, g, st);
    }
    return p;
  };
  EXPECT_EQ(run(), run());
}
