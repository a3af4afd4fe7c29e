#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "data/dataset.hpp"
#include "trainer/hyper.hpp"
#include "trainer/trainer.hpp"

using namespace gada;
using ad::Tensor;
using train::HyperParams;

namespace {

data::DomainShiftDataset small_moons(double angle = 30) {
  data::ShiftSpec spec;
  spec.angle_deg = angle;
  spec.n_source = spec.n_target = spec.n_test = 200;
  return data::generate(spec);
}

HyperParams quick(std::uint64_t steps = 20) {
  HyperParams hp;
  hp.steps = steps;
  hp.eval_interval = 10;
  hp.batch = 16;
  hp.dirt_steps = 10;
  hp.dirt_refresh_interval = 4;
  return hp;
}

}  // namespace

TEST(Hyper, Defaults) {
  const HyperParams hp;
  EXPECT_EQ(hp.steps, 3000u);
  EXPECT_EQ(hp.batch, 64u);
  EXPECT_EQ(hp.lr_cls, 2e-4);
  EXPECT_EQ(hp.weights.lambda_d, 1e-2);
  EXPECT_EQ(hp.weights.lambda_s, 1.0);
  EXPECT_EQ(hp.weights.lambda_t, 1e-2);
  EXPECT_EQ(hp.weights.lambda_u, 1.0);
  EXPECT_EQ(hp.adam_beta1, 0.5);
  EXPECT_EQ(hp.adam_beta2, 0.999);
  EXPECT_EQ(hp.dirt_beta, 1e-2);
  EXPECT_NO_THROW(hp.validate());
}

TEST(Hyper, Validation) {
  HyperParams hp;
  hp.batch = 1;
  EXPECT_THROW(hp.validate(), ContractError);
  hp = {};
  hp.lr_disc = -1e-4;
  EXPECT_THROW(hp.validate(), ContractError);
  hp = {};
  hp.weights.lambda_t = -0.1;
  EXPECT_THROW(hp.validate(), ContractError);
}

TEST(Hyper, KeyValueRoundTrip) {
  HyperParams hp;
  hp.weights.lambda_u = 0.3;
  hp.net.g_hidden = {16, 8};
  hp.toggles.vat = false;
  hp.vat.epsilon = 0.7;
  HyperParams back;
  for (const auto& [k, v] : train::to_key_values(hp)) EXPECT_TRUE(train::apply_key_value(back, k, v)) << k;
  EXPECT_EQ(back, hp);
}

TEST(Hyper, UnknownKeys) {
  HyperParams hp;
  EXPECT_FALSE(train::apply_key_value(hp, "data.angle", "3"));
  EXPECT_THROW(train::apply_key_value(hp, "hyper.lambda_q", "1"), ConfigError);
  EXPECT_THROW(train::apply_key_value(hp, "hyper.steps", "many"), ConfigError);
  EXPECT_TRUE(train::apply_key_value(hp, "hyper.lr", "0.001"));
  EXPECT_EQ(hp.lr_cls, 0.001);
}

TEST(Evaluate, PerfectAndConstantPredictors) {
  // 3 classes, features are one-hot votes read straight off by a hand-set model.
  HyperParams hp;
  hp.net.g_hidden = {3};
  hp.net.h_hidden = {};
  data::DomainShiftDataset ds;
  ds.num_classes = 3;
  ds.source_x = ds.target_x = ds.test_x = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  ds.source_y = ds.test_y = {1, 2, 3, 1, 2, 3};
  auto state = train::TrainState::create(hp, ds);
  auto& p = state.nets.classifier.params;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& v : p.entry(i).value.values()) v = 0.0;
  auto& w0 = p.at("g/W0");
  auto& w1 = p.at("h/W0");
  for (std::size_t i = 0; i < 3; ++i) {
    w0(i, i) = 1.0;
    w1(i, i) = 1.0;
  }
  auto ev = train::evaluate(state.nets.classifier, ds.test_x, ds.test_y);
  EXPECT_EQ(ev.accuracy, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(ev.confusion[i][j], i == j ? 2u : 0u);

  for (std::size_t i = 0; i < 3; ++i) w1(i, i) = 0.0;
  p.at("h/b0")[1] = 1.0;  // always class 2
  ev = train::evaluate(state.nets.classifier, ds.test_x, ds.test_y);
  EXPECT_NEAR(ev.accuracy, 1.0 / 3.0, 1e-15);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(ev.confusion[i][1], 2u);

  // A dominant fake-class logit never wins the argmax.
  p.at("h/b0")[3] = 100.0;
  EXPECT_NEAR(train::evaluate(state.nets.classifier, ds.test_x, ds.test_y).accuracy, 1.0 / 3.0, 1e-15);
  EXPECT_THROW(train::evaluate(state.nets.classifier, Tensor::zeros({1, 3}), {}), ContractError);
}

TEST(Evaluate, RowSumsAreClassCounts) {
  const auto ds = small_moons();
  const auto st = train::train(quick(5), ds);
  const auto ev = train::evaluate(st, ds);
  std::vector<std::uint64_t> counts(2, 0);
  for (int y : ds.test_y) ++counts[static_cast<std::size_t>(y - 1)];
  for (std::size_t i = 0; i < 2; ++i) {
    std::uint64_t s = 0;
    for (auto c : ev.confusion[i]) s += c;
    EXPECT_EQ(s, counts[i]);
  }
}

TEST(Train, ZeroStepsHasOnlyInitialEvaluation) {
  const auto st = train::train(quick(0), small_moons());
  ASSERT_EQ(st.evaluations.size(), 1u);
  EXPECT_EQ(st.evaluations[0].step, 0u);
}

TEST(Train, EvaluationSchedule) {
  const auto st = train::train(quick(25), small_moons());
  std::vector<std::uint64_t> steps;
  for (const auto& e : st.evaluations) steps.push_back(e.step);
  EXPECT_EQ(steps, (std::vector<std::uint64_t>{0, 10, 20, 25}));
}

TEST(Train, Deterministic) {
  const auto ds = small_moons();
  const auto a = train::train(quick(), ds);
  const auto b = train::train(quick(), ds);
  EXPECT_EQ(a, b);
  EXPECT_EQ(train::metrics_json(a), train::metrics_json(b));
  auto hp = quick();
  hp.seed = 2;
  EXPECT_NE(train::train(hp, ds).nets.classifier.params, a.nets.classifier.params);
}

TEST(Train, TracesFiniteForFullConfig) {
  const auto st = train::train(quick(30), small_moons());
  for (const char* key : {"s1.l_c", "s1.l_d", "s1.l_u", "s1.l_v_source", "s1.l_v_target", "s1.l_e", "s2.l_d",
                          "s3.l_g", "s1.objective"}) {
    ASSERT_TRUE(st.traces.count(key)) << key;
    EXPECT_EQ(st.traces.at(key).size(), 30u) << key;
    for (double v : st.traces.at(key)) EXPECT_TRUE(std::isfinite(v)) << key;
  }
}

TEST(Train, ZeroRatesKeepParamsButAppendTraces) {
  const auto ds = small_moons();
  auto st = train::TrainState::create(quick(1), ds);
  // Rates must be positive in a config, so zero them on the optimizers.
  st.nets.classifier_opt.config.lr = 0.0;
  st.nets.discriminator_opt.config.lr = 0.0;
  st.nets.generator_opt.config.lr = 0.0;
  const auto before = st.nets;
  train::train_step(st, ds);
  EXPECT_EQ(st.nets.classifier.params, before.classifier.params);
  EXPECT_EQ(st.nets.discriminator.params, before.discriminator.params);
  EXPECT_EQ(st.nets.generator.params, before.generator.params);
  EXPECT_EQ(st.traces.at("s1.l_c").size(), 1u);
  EXPECT_EQ(st.traces.at("s3.l_g").size(), 1u);
}

TEST(Train, SubStepsTouchOnlyTheirParameters) {
  const auto ds = small_moons();
  auto hp = quick();
  // S1 alone: discriminator and generator frozen.
  hp.toggles = {false, true, true, false};
  auto st = train::TrainState::create(hp, ds);
  auto before = st.nets;
  train::train_step(st, ds);
  EXPECT_NE(st.nets.classifier.params, before.classifier.params);
  EXPECT_EQ(st.nets.discriminator.params, before.discriminator.params);
  EXPECT_EQ(st.nets.generator.params, before.generator.params);

  // With every component on, each store moves exactly when its step runs.
  hp.toggles = {true, true, true, true};
  st = train::TrainState::create(hp, ds);
  before = st.nets;
  train::train_step(st, ds);
  EXPECT_NE(st.nets.classifier.params, before.classifier.params);
  EXPECT_NE(st.nets.discriminator.params, before.discriminator.params);
  EXPECT_NE(st.nets.generator.params, before.generator.params);
  EXPECT_EQ(st.nets.classifier_opt.step, 1u);
  EXPECT_EQ(st.nets.discriminator_opt.step, 1u);
  EXPECT_EQ(st.nets.generator_opt.step, 1u);
}

TEST(Train, LambdaDZeroLeavesDiscriminatorOutOfS1) {
  const auto ds = small_moons();
  auto hp = quick();
  hp.weights.lambda_d = 0.0;
  const auto with_d = train::train(hp, ds);
  hp.toggles.domain = false;
  const auto without_d = train::train(hp, ds);
  EXPECT_EQ(with_d.nets.classifier.params, without_d.nets.classifier.params);
  // S2 still trains the discriminator when only its weight is zero.
  EXPECT_NE(with_d.nets.discriminator.params, without_d.nets.discriminator.params);
}

TEST(Train, ToggleOffMatchesZeroWeight) {
  const auto ds = small_moons();
  struct Case {
    const char* name;
    std::function<void(HyperParams&)> zero_weight;
    std::function<void(HyperParams&)> toggle_off;
  };
  const std::vector<Case> cases = {
      {"domain", [](HyperParams& h) { h.weights.lambda_d = 0; }, [](HyperParams& h) { h.toggles.domain = false; }},
      {"unsupervised", [](HyperParams& h) { h.weights.lambda_u = 0; },
       [](HyperParams& h) { h.toggles.unsupervised = false; }},
      {"vat+entropy",
       [](HyperParams& h) {
         h.weights.lambda_s = 0;
         h.weights.lambda_t = 0;
       },
       [](HyperParams& h) {
         h.toggles.vat = false;
         h.toggles.entropy = false;
       }},
  };
  for (const auto& c : cases) {
    HyperParams a = quick(), b = quick();
    c.zero_weight(a);
    c.zero_weight(b);
    c.toggle_off(b);
    const auto sa = train::train(a, ds), sb = train::train(b, ds);
    EXPECT_EQ(sa.nets.classifier.params, sb.nets.classifier.params) << c.name;
    EXPECT_EQ(sa.evaluations, sb.evaluations) << c.name;
    EXPECT_EQ(sa.traces.at("s1.l_c"), sb.traces.at("s1.l_c")) << c.name;
  }
}

TEST(Train, SourceOnlyLearnsSeparableBlobs) {
  data::ShiftSpec spec;
  spec.family = data::Family::gauss_blobs;
  spec.num_classes = 2;
  const auto ds = data::generate(spec);
  HyperParams hp;
  hp.steps = 500;
  hp.eval_interval = 500;
  hp.toggles = {false, false, false, false};
  const auto st = train::train(hp, ds);
  const auto ev = train::evaluate(st.nets.classifier, ds.source_x, ds.source_y);
  EXPECT_GE(ev.accuracy, 0.99);
  const auto& lc = st.traces.at("s1.l_c");
  EXPECT_LT(lc.back(), 0.5 * lc.front());
}

TEST(Train, InstanceNormIsAppliedToEveryInput) {
  const auto ds = small_moons();
  auto hp = quick(5);
  hp.instance_norm = true;
  const auto st = train::train(hp, ds);
  const auto prepared = train::prepare(ds, hp);
  EXPECT_EQ(prepared.test_x, data::instance_normalize(ds.test_x));
  EXPECT_EQ(train::evaluate(st, ds), train::evaluate(st.nets.classifier, prepared.test_x, prepared.test_y));
}

TEST(Train, NumericAbortNamesLossAndStep) {
  const auto ds = small_moons();
  auto hp = quick(3);
  hp.lr_cls = 1e300;
  try {
    train::train(hp, ds);
    FAIL() << "expected a numeric abort";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
  }
}

TEST(Dirtt, ZeroStepsLeavesStateUnchanged) {
  const auto ds = small_moons();
  auto st = train::train(quick(), ds);
  const auto before = st;
  auto hp = st.hp;
  hp.dirt_steps = 0;
  train::dirtt_refine(st, ds, hp);
  EXPECT_EQ(st.nets, before.nets);
  EXPECT_EQ(st.dirt_step, 0u);
}

TEST(Dirtt, LargeBetaStaysNearTeacher) {
  const auto ds = small_moons();
  auto st = train::train(quick(40), ds);
  auto hp = st.hp;
  hp.dirt_beta = 1e6;
  hp.dirt_steps = 20;
  train::dirtt_refine(st, ds, hp);
  ASSERT_EQ(st.traces.at("dirt.kl_teacher").size(), 20u);
  for (double kl : st.traces.at("dirt.kl_teacher")) EXPECT_LT(kl, 1e-3);
  EXPECT_EQ(st.dirt_step, 20u);
  EXPECT_EQ(st.evaluations.back().phase, "refine");
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto ds = small_moons();
  auto st = train::train(quick(), ds);
  train::dirtt_refine(st, ds, st.hp);
  const std::string bytes = train::serialize_checkpoint(st);
  EXPECT_EQ(bytes.rfind("GADA-CKPT v1\n", 0), 0u);
  const auto back = train::parse_checkpoint(bytes);
  EXPECT_EQ(back, st);
  EXPECT_EQ(train::serialize_checkpoint(back), bytes);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gada_test_ckpt.gada";
  const auto st = train::train(quick(), small_moons());
  train::save_checkpoint(st, path);
  EXPECT_EQ(train::load_checkpoint(path), st);
  EXPECT_THROW(train::load_checkpoint(path.string() + ".missing"), IoError);
}

TEST(Checkpoint, MalformedInputs) {
  const auto st = train::train(quick(2), small_moons());
  const std::string bytes = train::serialize_checkpoint(st);
  EXPECT_THROW(train::parse_checkpoint("GADA-CKPT v2\n{}\n"), FormatError);
  EXPECT_THROW(train::parse_checkpoint(""), FormatError);
  EXPECT_THROW(train::parse_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  EXPECT_THROW(train::parse_checkpoint(bytes + "x"), FormatError);
  try {
    train::parse_checkpoint(bytes.substr(0, bytes.size() / 2));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos) << e.what();
  }
}

TEST(Checkpoint, ResumeMatchesUninterruptedRun) {
  const auto ds = small_moons();
  const auto full = train::train(quick(30), ds);
  auto hp = quick(30);
  hp.steps = 13;
  auto part = train::train(hp, ds);
  auto loaded = train::parse_checkpoint(train::serialize_checkpoint(part));
  loaded.hp.steps = 30;
  train::resume(loaded, ds);
  EXPECT_EQ(loaded.traces, full.traces);
  EXPECT_EQ(loaded.nets, full.nets);
  // The interrupted run adds an evaluation at the stop point.
  std::vector<train::Evaluation> expected = full.evaluations;
  std::vector<train::Evaluation> got;
  for (const auto& e : loaded.evaluations)
    if (e.step != 13) got.push_back(e);
  EXPECT_EQ(got, expected);
}

TEST(Metrics, DocumentShape) {
  const auto ds = small_moons();
  auto st = train::train(quick(20), ds);
  const std::string doc = train::metrics_json(st);
  EXPECT_NE(doc.find("\"format\": \"gada-metrics v1\""), std::string::npos);
  EXPECT_NE(doc.find("\"confusion\""), std::string::npos);
  EXPECT_NE(doc.find("\"target_accuracy\""), std::string::npos);
  EXPECT_EQ(doc.back(), '\n');
  EXPECT_EQ(doc.find("seconds"), std::string::npos);
}
