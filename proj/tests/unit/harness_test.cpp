#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uda/error.hpp"
#include "uda/harness.hpp"

using namespace uda;
namespace fs = std::filesystem;

namespace {

DomainRef moons_domain(const std::string& name, double rotation, std::uint64_t seed, bool take_target) {
  ShiftSpec s;
  s.rotation_deg = rotation;
  s.n_per_domain = 300;
  s.seed = seed;
  auto [src, tgt] = make_shift_pair(s);
  Dataset d = take_target ? tgt : src;
  d.domain_tag = name;
  return std::make_shared<const Domain>(Domain{name, std::move(d)});
}

TaskSpec small_task(const AlgorithmConfig& algo, double rotation = 35) {
  TaskSpec t;
  t.source = moons_domain("src", rotation, 1, false);
  t.target = moons_domain("tgt", rotation, 1, true);
  t.algorithm = algo;
  t.optimizer = default_optimizer(algo);
  t.model = ModelSettings{{16}, 8, {8}};
  t.seeds = {0, 1};
  t.epochs = 3;
  t.iterations_per_epoch = 20;
  t.batch = 16;
  return t;
}

// Linear identity extractor followed by a classifier that predicts class 0
// when x0 > 0.
ModelBundle sign_classifier() {
  ModelBundle m = init_bundle(LayerSpec{{2, 2}}, LayerSpec{{2, 2}}, LayerSpec{{2, 1}}, 0);
  m.ef.weights[0] = Tensor::identity(2);
  m.h.weights[0] = Tensor{{1, -1}, {0, 0}};
  return m;
}

void expect_same(const TaskResult& a, const TaskResult& b) {
  EXPECT_EQ(a.algorithm, b.algorithm);
  EXPECT_EQ(a.task, b.task);
  EXPECT_EQ(a.mean_best, b.mean_best);
  EXPECT_EQ(a.mean_final, b.mean_final);
  ASSERT_EQ(a.seeds.size(), b.seeds.size());
  for (std::size_t i = 0; i < a.seeds.size(); ++i) {
    EXPECT_EQ(a.seeds[i].seed, b.seeds[i].seed);
    EXPECT_EQ(a.seeds[i].curve, b.seeds[i].curve);
    EXPECT_EQ(a.seeds[i].failed, b.seeds[i].failed);
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Evaluate, HandWiredClassifier) {
  Dataset d;
  d.features = Tensor{{1, 0.3}, {-2, 1}, {0.5, -4}, {-0.1, 0}};
  d.labels = std::vector<int>{0, 1, 0, 1};
  d.class_count = 2;
  EXPECT_EQ(evaluate(sign_classifier(), d), 1.0);
  d.labels = std::vector<int>{1, 0, 1, 0};
  EXPECT_EQ(evaluate(sign_classifier(), d), 0.0);
  d.labels.reset();
  EXPECT_THROW(evaluate(sign_classifier(), d), ContractError);
}

TEST(Evaluate, UntrainedModelIsNearChance) {
  Rng rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset d;
  d.features = Tensor(10000, 2);
  for (double& v : d.features.data()) v = n(rng);
  std::vector<int> labels(10000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  d.labels = labels;
  d.class_count = 2;
  const Architecture a = make_architecture(2, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double acc = evaluate(init_bundle(a.ef, a.h, a.d, seed), d);
    EXPECT_GE(acc, 0.45);
    EXPECT_LE(acc, 0.55);
  }
}

TEST(RunTask, Deterministic) {
  for (const AlgorithmConfig& algo : {AlgorithmConfig{DsanConfig{}, ""}, AlgorithmConfig{SsrtConfig{}, ""}}) {
    const TaskSpec t = small_task(algo);
    expect_same(run_task(t), run_task(t));
  }
}

TEST(RunTask, ZeroEpochsIsUntrainedEvaluation) {
  TaskSpec t = small_task({SourceOnlyConfig{}, ""});
  t.epochs = 0;
  const TaskResult r = run_task(t);
  ASSERT_EQ(r.seeds.size(), 2u);
  for (const SeedResult& s : r.seeds) {
    ASSERT_EQ(s.curve.size(), 1u);
    EXPECT_EQ(s.curve[0], evaluate(initial_bundle(t, s.seed), t.target->data));
    EXPECT_EQ(s.best, s.curve[0]);
    EXPECT_EQ(s.final, s.curve[0]);
  }
}

TEST(RunTask, CurveBookkeeping) {
  const TaskResult r = run_task(small_task({CoralConfig{}, ""}));
  EXPECT_EQ(r.algorithm, "coral");
  EXPECT_EQ(r.task, "src_to_tgt");
  EXPECT_FALSE(r.source_only);
  double mean = 0;
  for (const SeedResult& s : r.seeds) {
    EXPECT_EQ(s.curve.size(), 4u);
    EXPECT_EQ(s.best, *std::max_element(s.curve.begin(), s.curve.end()));
    EXPECT_EQ(s.final, s.curve.back());
    for (double a : s.curve) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 1.0);
    }
    mean += s.best / 2;
  }
  EXPECT_DOUBLE_EQ(r.mean_best, mean);
}

TEST(RunTask, SourceOnlyLearnsUnshiftedMoons) {
  TaskSpec t = small_task({SourceOnlyConfig{}, ""}, 0);
  t.model = ModelSettings{};
  t.optimizer.lr0 = 0.03;
  t.epochs = 20;
  t.iterations_per_epoch = 50;
  t.batch = 32;
  t.seeds = {0, 1};
  const TaskResult r = run_task(t);
  EXPECT_TRUE(r.source_only);
  for (const SeedResult& s : r.seeds) EXPECT_GE(s.best, 0.95);
}

TEST(RunTask, Validation) {
  TaskSpec t = small_task({SourceOnlyConfig{}, ""});
  t.seeds.clear();
  EXPECT_THROW(run_task(t), ConfigError);
  t = small_task({SourceOnlyConfig{}, ""});
  t.target = t.source;
  EXPECT_THROW(run_task(t), ConfigError);
}

TEST(RunTask, WritesRunLogsAndCheckpoints) {
  const fs::path dir = fs::temp_directory_path() / "udakit_harness_runlog";
  fs::remove_all(dir);
  fs::create_directories(dir);
  TaskSpec t = small_task({BnmConfig{}, ""});
  t.run_dir = dir.string();
  t.save_checkpoints = true;
  t.dump_embeddings = true;
  run_task(t);
  const std::string log = slurp(dir / "runlog_bnm_src_to_tgt_0.csv");
  EXPECT_EQ(log.substr(0, log.find('\n')), "step,epoch,lr,total,ce,adapt,sr,r,diversity");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 61);
  EXPECT_TRUE(fs::exists(dir / "runlog_bnm_src_to_tgt_1.csv"));
  const Checkpoint c = load_checkpoint((dir / "checkpoint_bnm_src_to_tgt_1.txt").string());
  EXPECT_EQ(c.step, 60u);
  const std::string emb = slurp(dir / "embeddings_bnm_src_to_tgt.csv");
  EXPECT_EQ(std::count(emb.begin(), emb.end(), '\n'), 601);
}

TEST(Matrix, TaskCounts) {
  MatrixSpec m;
  m.algorithms = {{DanConfig{}, ""}};
  m.base = small_task({SourceOnlyConfig{}, ""});
  for (std::size_t n : {2u, 3u, 4u}) {
    m.domains.clear();
    for (std::size_t i = 0; i < n; ++i) m.domains.push_back(moons_domain("d" + std::to_string(i), 10.0 * i, 1, true));
    const auto tasks = expand_matrix(m);
    const std::size_t per = n * (n - 1);
    ASSERT_EQ(tasks.size(), 2 * per);  // source_only is added
    for (std::size_t i = 0; i < per; ++i) EXPECT_TRUE(tasks[i].algorithm.is_source_only());
    EXPECT_EQ(tasks[per].algorithm.name(), "dan");
  }
  m.domains.push_back(moons_domain("d0", 0, 2, false));
  EXPECT_THROW(expand_matrix(m), ConfigError);
  m.domains.resize(1);
  EXPECT_THROW(expand_matrix(m), ConfigError);
}

TEST(Matrix, WorkerCountDoesNotChangeResults) {
  MatrixSpec m;
  m.domains = {moons_domain("a", 0, 3, false), moons_domain("b", 30, 3, true), moons_domain("c", 60, 4, true)};
  m.algorithms = {{SourceOnlyConfig{}, ""}, {DannConfig{}, ""}, {DsanConfig{}, ""}};
  m.base = small_task({SourceOnlyConfig{}, ""});
  m.base.epochs = 2;
  m.workers = 1;
  const auto serial = run_matrix(m);
  m.workers = 4;
  const auto parallel = run_matrix(m);
  ASSERT_EQ(serial.size(), 18u);
  ASSERT_EQ(parallel.size(), serial.size());
  for (std::size_t i = 0; i < serial.size(); ++i) expect_same(serial[i], parallel[i]);
}

TEST(Embeddings, RowsAndSeparation) {
  Rng rng(5);
  std::normal_distribution<double> n(0.0, 0.3);
  Dataset s, t;
  s.features = Tensor(40, 2);
  t.features = Tensor(30, 2);
  for (double& v : s.features.data()) v = n(rng);
  for (double& v : t.features.data()) v = 10.0 + n(rng);
  s.domain_tag = "S";
  t.domain_tag = "T";
  const ModelBundle id = sign_classifier();
  const fs::path p = fs::temp_directory_path() / "udakit_embeddings.csv";
  dump_embeddings(id, s, t, p.string());
  const fs::path q = fs::temp_directory_path() / "udakit_embeddings_again.csv";
  dump_embeddings(id, s, t, q.string());
  EXPECT_EQ(slurp(p), slurp(q));

  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "domain_tag,true_label,pc1,pc2");
  double cs[2] = {0, 0}, ct[2] = {0, 0};
  std::vector<std::array<double, 2>> ps, pt;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string tag, label, a, b;
    std::getline(row, tag, ',');
    std::getline(row, label, ',');
    std::getline(row, a, ',');
    std::getline(row, b, ',');
    EXPECT_EQ(label, "-1");
    (tag == "S" ? ps : pt).push_back({std::stod(a), std::stod(b)});
  }
  ASSERT_EQ(ps.size(), 40u);
  ASSERT_EQ(pt.size(), 30u);
  for (auto& v : ps) cs[0] += v[0] / 40, cs[1] += v[1] / 40;
  for (auto& v : pt) ct[0] += v[0] / 30, ct[1] += v[1] / 30;
  double spread = 0;
  for (auto& v : ps) spread = std::max(spread, std::hypot(v[0] - cs[0], v[1] - cs[1]));
  for (auto& v : pt) spread = std::max(spread, std::hypot(v[0] - ct[0], v[1] - ct[1]));
  EXPECT_GT(std::hypot(cs[0] - ct[0], cs[1] - ct[1]), spread);
}
