#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "scenarios.hpp"
#include "test_util.hpp"
#include "uda/algorithms.hpp"
#include "uda/error.hpp"

using namespace uda;

namespace {

TrainerState scalar_trainer(double theta, double momentum, double wd) {
  TrainerState s;
  s.bundle.ef.weights = {Tensor{{theta}}};
  s.bundle.ef.biases = {Tensor{{0.0}}};
  s.velocity = {Tensor{{0.0}}, Tensor{{0.0}}};
  s.momentum = momentum;
  s.weight_decay = wd;
  return s;
}

BatchPair moons_batch(std::size_t b, std::uint64_t seed) {
  ShiftSpec spec;
  spec.rotation_deg = 35;
  spec.seed = seed;
  const auto [src, tgt] = make_shift_pair(spec);
  Rng rng(seed);
  return sample_balanced_batch(src, tgt, b, rng);
}

TrainerState moons_trainer(std::uint64_t seed) {
  const Architecture a = make_architecture(2, 2, {8}, 4, {4});
  return make_trainer(init_bundle(a.ef, a.h, a.d, seed), OptimizerConfig{}, seed);
}

}  // namespace

TEST(LrSchedule, Examples) {
  EXPECT_EQ(lr_at(0.01, 0.0, 10, 0.75), 0.01);
  EXPECT_NEAR(lr_at(1.0, 1.0, 10, 0.75), 0.16556, 1e-5);
  EXPECT_DOUBLE_EQ(lr_at(0.3, 1.0, 10, 0.75), 0.3 * std::pow(11.0, -0.75));
  double prev = lr_at(1.0, 0.0, 10, 0.75);
  for (int i = 1; i <= 100; ++i) {
    const double v = lr_at(1.0, i / 100.0, 10, 0.75);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Sgd, HandSteps) {
  TrainerState s = scalar_trainer(1.0, 0.0, 0.0);
  const std::vector<Tensor> g{Tensor{{1.0}}, Tensor{{0.0}}};
  sgd_step(s, g, 0.1);
  EXPECT_DOUBLE_EQ(s.bundle.ef.weights[0](0, 0), 0.9);

  s = scalar_trainer(1.0, 0.9, 0.0);
  sgd_step(s, g, 0.1);
  EXPECT_DOUBLE_EQ(s.bundle.ef.weights[0](0, 0), 0.9);
  sgd_step(s, g, 0.1);
  EXPECT_DOUBLE_EQ(s.velocity[0](0, 0), 1.9);
  EXPECT_NEAR(s.bundle.ef.weights[0](0, 0), 0.71, 1e-15);
}

TEST(Sgd, ZeroGradientDecaysBuffers) {
  TrainerState s = scalar_trainer(2.0, 0.5, 0.0);
  s.velocity[0](0, 0) = 0.0;
  const std::vector<Tensor> g{Tensor{{0.0}}, Tensor{{0.0}}};
  sgd_step(s, g, 0.1);
  EXPECT_EQ(s.bundle.ef.weights[0](0, 0), 2.0);
  s.velocity[0](0, 0) = 8.0;
  const double theta = s.bundle.ef.weights[0](0, 0);
  sgd_step(s, g, 0.0);
  sgd_step(s, g, 0.0);
  EXPECT_EQ(s.velocity[0](0, 0), 2.0);
  EXPECT_EQ(s.bundle.ef.weights[0](0, 0), theta);
}

TEST(Sgd, WeightDecayEntersVelocity) {
  TrainerState s = scalar_trainer(2.0, 0.9, 0.5);
  sgd_step(s, std::vector<Tensor>{Tensor{{0.0}}, Tensor{{0.0}}}, 0.1);
  EXPECT_DOUBLE_EQ(s.velocity[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(s.bundle.ef.weights[0](0, 0), 1.9);
}

TEST(Sgd, NonFiniteGradientLeavesStateUntouched) {
  TrainerState s = moons_trainer(1);
  s.velocity[2](0, 0) = 0.25;
  const TrainerState before = s;
  std::vector<Tensor> g;
  for (const Tensor* p : s.bundle.params()) g.emplace_back(p->rows(), p->cols(), 0.1);
  g[3](0, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    sgd_step(s, g, 0.1);
    FAIL();
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find(s.bundle.param_names()[3]), std::string::npos) << e.what();
  }
  EXPECT_EQ(s.bundle, before.bundle);
  EXPECT_EQ(s.velocity, before.velocity);
  g.pop_back();
  EXPECT_THROW(sgd_step(s, g, 0.1), ShapeError);
}

TEST(TrainStep, NonFiniteLossAbortsWithStateUnchanged) {
  TrainerState s = moons_trainer(2);
  const TrainerState before = s;
  BatchPair b = moons_batch(4, 2);
  b.xs(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train_step({SourceOnlyConfig{}, ""}, s, b, StepContext{}), TrainingError);
  EXPECT_EQ(s.bundle, before.bundle);
  EXPECT_EQ(s.velocity, before.velocity);
  EXPECT_EQ(s.step, before.step);
}

TEST(TrainStep, DivergedTargetInBnmIsATrainingError) {
  TrainerState s = moons_trainer(3);
  const TrainerState before = s;
  BatchPair b = moons_batch(4, 3);
  b.xt(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train_step({BnmConfig{}, ""}, s, b, StepContext{}), TrainingError);
  EXPECT_EQ(s.bundle, before.bundle);
  EXPECT_EQ(s.step, before.step);
}

TEST(TrainStep, EveryMethodFiniteAndAdvances) {
  for (const AlgorithmConfig& cfg : test::every_method()) {
    TrainerState s = moons_trainer(3);
    const ModelBundle before = s.bundle;
    const LossBreakdown l = train_step(cfg, s, moons_batch(8, 3), StepContext{});
    EXPECT_TRUE(std::isfinite(l.total)) << cfg.name();
    EXPECT_EQ(s.step, 1u);
    EXPECT_NE(s.bundle, before) << cfg.name();
    if (cfg.is_source_only()) {
      EXPECT_EQ(l.adapt, 0.0);
    }
  }
}

TEST(TrainStep, ZeroAdaptationReducesToSourceOnly) {
  const ModelBundle reference = test::train_trajectory({SourceOnlyConfig{}, ""}, 100, 5);
  for (const AlgorithmConfig& cfg : test::every_method()) {
    EXPECT_EQ(test::train_trajectory(without_adaptation(cfg), 100, 5), reference) << cfg.name();
  }
}

TEST(TrainStep, AdaptationChangesTheTrajectory) {
  const ModelBundle reference = test::train_trajectory({SourceOnlyConfig{}, ""}, 20, 5);
  for (const AlgorithmConfig& cfg : test::every_method()) {
    if (cfg.is_source_only()) continue;
    EXPECT_NE(test::train_trajectory(cfg, 20, 5), reference) << cfg.name();
  }
}

TEST(TrainStep, SsrtWithoutPerturbationMatchesDann) {
  SsrtConfig ssrt;
  ssrt.lambda_max = 0.0;
  ssrt.eps = 0.0;
  const BatchPair b = moons_batch(8, 6);
  TrainerState a = moons_trainer(6), d = moons_trainer(6);
  const LossBreakdown ls = train_step({ssrt, ""}, a, b, StepContext{});
  const LossBreakdown ld = train_step({DannConfig{}, ""}, d, b, StepContext{});
  EXPECT_EQ(ls.sr, 0.0);
  EXPECT_EQ(ls.total, ld.total);
  for (std::size_t i = 0; i < a.velocity.size(); ++i) {
    EXPECT_LE(max_abs_diff(a.velocity[i], d.velocity[i]), 1e-12);
  }
}

TEST(Objective, DannSignStructure) {
  const TrainerState s = moons_trainer(7);
  const BatchPair b = moons_batch(6, 7);
  const std::size_t n_ef = 2 * s.bundle.ef.weights.size();
  const std::size_t n_h = 2 * s.bundle.h.weights.size();
  for (double coeff : {1.0, 0.4}) {
    DannConfig dann;
    dann.grl.value = coeff;
    auto adapt_grads = [&](bool reversed) {
      Tape t;
      const BundleVars v = attach(s.bundle, t);
      std::vector<Tensor> out;
      if (reversed) {
        StepAux aux;
        Rng rng(0);
        const Objective o = build_objective({dann, ""}, v, b, StepContext{}, aux, rng);
        t.backward(o.adapt_term);
      } else {
        const Var fs = ef_forward(v, t.constant(b.xs)).features;
        const Var ft = ef_forward(v, t.constant(b.xt)).features;
        t.backward(domain_adv_loss(discriminate(v, concat_rows(fs, ft)), b.z));
      }
      for (const Var& p : v.all()) out.push_back(t.grad(p));
      return out;
    };
    const auto rev = adapt_grads(true), plain = adapt_grads(false);
    for (std::size_t i = 0; i < rev.size(); ++i) {
      if (i < n_ef) {
        EXPECT_LE(max_abs_diff(rev[i], plain[i] * -coeff), 1e-12);
      } else if (i >= n_ef + n_h) {
        EXPECT_LE(max_abs_diff(rev[i], plain[i]), 1e-12);
      } else {
        EXPECT_EQ(rev[i], Tensor::zeros(rev[i].rows(), rev[i].cols()));
      }
    }
  }
}

TEST(Config, ValidationAndDefaults) {
  EXPECT_THROW((AlgorithmConfig{CoralConfig{-1.0}, ""}.validate()), ConfigError);
  SsrtConfig bad;
  bad.eps = 1.0;
  EXPECT_THROW((AlgorithmConfig{bad, ""}.validate()), ConfigError);
  bad = SsrtConfig{};
  bad.omega = 1.5;
  EXPECT_THROW((AlgorithmConfig{bad, ""}.validate()), ConfigError);
  EXPECT_EQ((AlgorithmConfig{BnmConfig{}, ""}.name()), "bnm");
  EXPECT_EQ((AlgorithmConfig{BnmConfig{}, "BNM-x"}.name()), "BNM-x");
  const OptimizerConfig o = default_optimizer({SourceOnlyConfig{}, ""});
  EXPECT_EQ(o.momentum, 0.9);
  EXPECT_EQ(o.weight_decay, 5e-4);
}
