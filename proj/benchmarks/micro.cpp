#include <benchmark/benchmark.h>

#include <random>

#include "uda/algorithms.hpp"
#include "uda/divergences.hpp"
#include "uda/linalg.hpp"

using namespace uda;

namespace {

Tensor random(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random(n, n, 1), b = random(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

// Forward and backward of the five-bandwidth kernel MMD.
void BM_MkMmd(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const Tensor x = random(b, 32, 3), y = random(b, 32, 4);
  const std::vector<double> sigmas{0.5, 1, 2, 4, 8};
  for (auto _ : state) {
    Tape t;
    const Var xv = t.leaf(x), yv = t.leaf(y);
    t.backward(mk_mmd2(xv, yv, sigmas));
    benchmark::DoNotOptimize(t.grad(xv));
  }
}
BENCHMARK(BM_MkMmd)->Arg(16)->Arg(32)->Arg(64);

void BM_Lmmd(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const Tensor x = random(b, 32, 5), y = random(b, 32, 6);
  std::vector<int> labels(b);
  for (std::size_t i = 0; i < b; ++i) labels[i] = static_cast<int>(i % 4);
  const ClassWeights ws = lmmd_weights(labels, 4);
  const ClassWeights wt = lmmd_weights(softmax_rows(random(b, 4, 7)));
  const std::vector<double> sigmas{0.5, 1, 2, 4, 8};
  for (auto _ : state) {
    Tape t;
    const Var xv = t.leaf(x), yv = t.leaf(y);
    t.backward(lmmd2(xv, yv, ws, wt, sigmas));
    benchmark::DoNotOptimize(t.grad(xv));
  }
}
BENCHMARK(BM_Lmmd)->Arg(16)->Arg(32)->Arg(64);

void BM_JacobiSvd(benchmark::State& state) {
  const auto b = static_cast<std::size_t>(state.range(0));
  const Tensor a = random(b, static_cast<std::size_t>(state.range(1)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(svd_jacobi(a));
}
BENCHMARK(BM_JacobiSvd)->Args({32, 2})->Args({32, 10})->Args({64, 31});

void BM_TrainStep(benchmark::State& state, AlgorithmConfig cfg) {
  ShiftSpec spec;
  spec.rotation_deg = 35;
  const auto [src, tgt] = make_shift_pair(spec);
  const Architecture a = make_architecture(2, 2);
  TrainerState s = make_trainer(init_bundle(a.ef, a.h, a.d, 1), OptimizerConfig{}, 2);
  Rng rng(3);
  const BatchPair batch = sample_balanced_batch(src, tgt, 32, rng);
  StepContext ctx;
  for (auto _ : state) benchmark::DoNotOptimize(train_step(cfg, s, batch, ctx));
}
BENCHMARK_CAPTURE(BM_TrainStep, source_only, AlgorithmConfig{SourceOnlyConfig{}, ""});
BENCHMARK_CAPTURE(BM_TrainStep, coral, AlgorithmConfig{CoralConfig{}, ""});
BENCHMARK_CAPTURE(BM_TrainStep, dan, AlgorithmConfig{DanConfig{}, ""});
BENCHMARK_CAPTURE(BM_TrainStep, dann, AlgorithmConfig{DannConfig{}, ""});
BENCHMARK_CAPTURE(BM_TrainStep, dsan, AlgorithmConfig{DsanConfig{}, ""});
BENCHMARK_CAPTURE(BM_TrainStep, bnm, AlgorithmConfig{BnmConfig{}, ""});
BENCHMARK_CAPTURE(BM_TrainStep, ssrt, AlgorithmConfig{SsrtConfig{}, ""});

}  // namespace

BENCHMARK_MAIN();
