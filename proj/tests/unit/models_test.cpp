#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "uda/divergences.hpp"
#include "uda/error.hpp"
#include "uda/models.hpp"

using namespace uda;

namespace {

ModelBundle small_bundle(std::uint64_t seed, std::size_t d = 3, std::size_t c = 4) {
  const Architecture a = make_architecture(d, c, {6}, 5, {4});
  return init_bundle(a.ef, a.h, a.d, seed);
}

void zero_all(ModelBundle& m) {
  for (Tensor* p : m.params()) *p = Tensor::zeros(p->rows(), p->cols());
}

}  // namespace

TEST(Init, DeterministicZeroBiasesAndBounded) {
  const ModelBundle a = small_bundle(42), b = small_bundle(42), c = small_bundle(43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (const Mlp* mlp : {&a.ef, &a.h, &a.d}) {
    for (std::size_t l = 0; l < mlp->weights.size(); ++l) {
      const Tensor& w = mlp->weights[l];
      const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (double v : w.data()) EXPECT_LE(std::abs(v), bound);
      for (double v : mlp->biases[l].data()) EXPECT_EQ(v, 0.0);
    }
  }
}

TEST(Init, IncompatibleWidths) {
  EXPECT_THROW(init_bundle(LayerSpec{{3, 5}}, LayerSpec{{4, 2}}, LayerSpec{{5, 1}}, 0), ConfigError);
  EXPECT_THROW(init_bundle(LayerSpec{{3, 5}}, LayerSpec{{5, 2}}, LayerSpec{{5, 2}}, 0), ConfigError);
  EXPECT_THROW(init_bundle(LayerSpec{{3}}, LayerSpec{{3, 2}}, LayerSpec{{3, 1}}, 0), ConfigError);
  EXPECT_THROW(init_bundle(LayerSpec{{3, 0, 5}}, LayerSpec{{5, 2}}, LayerSpec{{5, 1}}, 0), ConfigError);
}

TEST(EfForward, ZeroParametersGiveZeroFeatures) {
  ModelBundle m = small_bundle(1);
  zero_all(m);
  Rng rng(1);
  const Tensor f = extract_features(m, test::random_tensor(7, 3, rng, -5, 5));
  EXPECT_EQ(f, Tensor::zeros(7, 5));
}

TEST(EfForward, SingleLayerIsAffine) {
  ModelBundle m = init_bundle(LayerSpec{{3, 4}}, LayerSpec{{4, 2}}, LayerSpec{{4, 1}}, 9);
  m.ef.biases[0] = Tensor{{0.5, -1, 2, 0}};
  Rng rng(2);
  const Tensor x = test::random_tensor(5, 3, rng);
  Tensor expect = matmul(x, m.ef.weights[0]);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 4; ++k) expect(i, k) += m.ef.biases[0](0, k);
  EXPECT_EQ(extract_features(m, x), expect);
}

TEST(EfForward, InputGradientMatchesFiniteDifference) {
  const ModelBundle m = small_bundle(3);
  Rng rng(3);
  const Tensor x = test::random_tensor(4, 3, rng);
  Tape tape;
  const BundleVars v = attach(m, tape);
  const Var xv = tape.leaf(x);
  const Var s = sum(ef_forward(v, xv).features);
  tape.backward(s);
  const Tensor g = tape.grad(xv);
  const double h = 1e-6;
  auto f = [&](const Tensor& in) {
    const Tensor out = extract_features(m, in);
    double acc = 0;
    for (double e : out.data()) acc += e;
    return acc;
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor p = x, q = x;
    p[i] += h;
    q[i] -= h;
    const double fd = (f(p) - f(q)) / (2 * h);
    EXPECT_LE(std::abs(fd - g[i]), 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST(EfForward, ShapeMismatch) {
  const ModelBundle m = small_bundle(4);
  EXPECT_THROW(extract_features(m, Tensor(2, 4)), ShapeError);
  Tape tape;
  const BundleVars v = attach(m, tape);
  EXPECT_THROW(classify(v, tape.constant(Tensor(2, 4))), ShapeError);
  EXPECT_THROW(discriminate(v, tape.constant(Tensor(2, 6))), ShapeError);
}

TEST(EfForward, ExposesPreActivationsAndIsDeterministic) {
  const ModelBundle m = small_bundle(5);
  Rng rng(5);
  const Tensor x = test::random_tensor(6, 3, rng);
  Tape tape;
  const BundleVars v = attach(m, tape);
  const EfOutput out = ef_forward(v, tape.constant(x));
  ASSERT_EQ(out.pre_activations.size(), 2u);
  EXPECT_EQ(out.pre_activations[0].shape(), (Shape{6, 6}));
  EXPECT_EQ(out.features.value(), extract_features(m, x));
  EXPECT_EQ(extract_features(m, x), extract_features(m, x));
}

TEST(Heads, ClassifyShapeAndDiscriminateRange) {
  ModelBundle m = small_bundle(6);
  Rng rng(6);
  for (std::size_t b : {1u, 3u, 17u}) {
    EXPECT_EQ(predict_logits(m, test::random_tensor(b, 3, rng)).shape(), (Shape{b, 4}));
  }
  Tape tape;
  {
    ModelBundle z = m;
    zero_all(z);
    const BundleVars v = attach(z, tape);
    const Tensor p = discriminate(v, tape.constant(test::random_tensor(8, 5, rng))).value();
    EXPECT_EQ(p.shape(), (Shape{8, 1}));
    for (double e : p.data()) EXPECT_EQ(e, 0.5);
  }
  const BundleVars v = attach(m, tape);
  const Tensor p = discriminate(v, tape.constant(test::random_tensor(8, 5, rng, -1e6, 1e6))).value();
  for (double e : p.data()) {
    EXPECT_GE(e, kDiscClamp);
    EXPECT_LE(e, 1.0 - kDiscClamp);
  }
}

TEST(Grl, ValueTransparentAndScalesGradient) {
  Rng rng(7);
  const Tensor x = test::random_tensor(3, 4, rng);
  for (double coeff : {1.0, 0.0, 0.3}) {
    Tape tape;
    const Var xv = tape.leaf(x);
    const Var y = grl(xv, coeff);
    EXPECT_EQ(y.value(), x);
    tape.backward(sum(y));
    for (double g : tape.grad(xv).data()) EXPECT_EQ(g, -coeff);
  }
}

TEST(Grl, RampSchedule) {
  GrlCoefficient c;
  EXPECT_EQ(c.at(0.3), 1.0);
  c.schedule = GrlCoefficient::Schedule::kRamp;
  c.value = 2.0;
  EXPECT_DOUBLE_EQ(c.at(0.0), 0.0);
  EXPECT_NEAR(c.at(1.0), 2.0 * (2.0 / (1.0 + std::exp(-10.0)) - 1.0), 1e-15);
  EXPECT_DOUBLE_EQ(progress_ramp(0.5), 2.0 / (1.0 + std::exp(-5.0)) - 1.0);
}

TEST(Grl, DiscriminatorGradientUnaffected) {
  const ModelBundle m = small_bundle(8);
  Rng rng(8);
  const Tensor x = test::random_tensor(6, 3, rng);
  const std::vector<double> z{1, 1, 1, 0, 0, 0};
  auto run = [&](bool reversed, std::vector<Tensor>& grads) {
    Tape tape;
    const BundleVars v = attach(m, tape);
    Var f = ef_forward(v, tape.constant(x)).features;
    if (reversed) f = grl(f, 1.0);
    const Var loss = domain_adv_loss(discriminate(v, f), z);
    tape.backward(loss);
    for (const Var& p : v.all()) grads.push_back(tape.grad(p));
    return loss.value().item();
  };
  std::vector<Tensor> plain, rev;
  EXPECT_EQ(run(false, plain), run(true, rev));
  const std::size_t n_ef = 2 * m.ef.weights.size(), n_h = 2 * m.h.weights.size();
  for (std::size_t i = 0; i < plain.size(); ++i) {
    if (i < n_ef) {
      EXPECT_EQ(rev[i], plain[i] * -1.0);
    } else if (i >= n_ef + n_h) {
      EXPECT_EQ(rev[i], plain[i]);
    }
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  Checkpoint c;
  c.bundle = small_bundle(10);
  c.bundle.ef.biases[0](0, 1) = 1.0 / 3.0;
  c.step = 1234;
  Rng rng(11);
  rng.discard(7);
  std::ostringstream s;
  s << rng;
  c.rng_state = s.str();
  const auto p = std::filesystem::temp_directory_path() / "udakit_models_ckpt.txt";
  save_checkpoint(c, p.string());
  EXPECT_EQ(load_checkpoint(p.string()), c);
}

TEST(Checkpoint, Errors) {
  const auto dir = std::filesystem::temp_directory_path();
  EXPECT_THROW(load_checkpoint((dir / "udakit_no_such_ckpt.txt").string()), IoError);
  const auto bad = dir / "udakit_bad_ckpt.txt";
  std::ofstream(bad) << "hello\n";
  EXPECT_THROW(load_checkpoint(bad.string()), ParseError);
}
