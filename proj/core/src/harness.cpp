#include "uda/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "uda/error.hpp"

namespace uda {

namespace {

constexpr std::uint64_t kInitSalt = 0x1a2b'3c4d'0000'0001ULL;
constexpr std::uint64_t kBatchSalt = 0x1a2b'3c4d'0000'0002ULL;
constexpr std::uint64_t kTrainerSalt = 0x1a2b'3c4d'0000'0003ULL;
constexpr std::uint64_t kLabelSalt = 0x1a2b'3c4d'0000'0004ULL;

// splitmix64 finalizer, so nearby seeds give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed ^ salt;
  z += 0x9e37'79b9'7f4a'7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58'476d'1ce4'e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d0'49bb'1331'11ebULL;
  return z ^ (z >> 31);
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<int> known_target_labels(const TaskSpec& t, std::uint64_t seed) {
  if (t.target_labeled_fraction <= 0.0) return {};
  const Dataset& d = t.target->data;
  const auto n = d.size();
  const auto k = static_cast<std::size_t>(std::floor(t.target_labeled_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, kLabelSalt));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> known(n, -1);
  for (std::size_t i = 0; i < k; ++i) known[order[i]] = (*d.labels)[order[i]];
  return known;
}

class RunLog {
 public:
  RunLog(const TaskSpec& t, std::uint64_t seed) {
    if (t.run_dir.empty()) return;
    const auto path = std::filesystem::path(t.run_dir) /
                      ("runlog_" + t.algorithm.name() + "_" + t.task_name() + "_" +
                       std::to_string(seed) + ".csv");
    out_.open(path);
    if (!out_) throw IoError("cannot write " + path.string());
    out_ << "step,epoch,lr,total,ce,adapt,sr,r,diversity\n";
  }

  void write(const LossBreakdown& b) {
    if (!out_.is_open()) return;
    out_ << b.step << ',' << b.epoch << ',' << fmt17(b.lr) << ',' << fmt17(b.total) << ','
         << fmt17(b.ce) << ',' << fmt17(b.adapt) << ',' << fmt17(b.sr) << ',' << fmt17(b.r) << ','
         << b.diversity << '\n';
  }

 private:
  std::ofstream out_;
};

void summarize(SeedResult& r) {
  if (r.curve.empty()) return;
  r.best = *std::max_element(r.curve.begin(), r.curve.end());
  r.final = r.curve.back();
}

}  // namespace

std::string TaskSpec::task_name() const {
  return (source ? source->name : "?") + "_to_" + (target ? target->name : "?");
}

void TaskSpec::validate() const {
  if (!source || !target) throw ConfigError("task: source and target are required");
  if (source->name == target->name) throw ConfigError("task: source and target are both " + source->name);
  if (seeds.empty()) throw ConfigError("task " + task_name() + ": no seeds");
  if (batch == 0) throw ConfigError("task " + task_name() + ": batch must be positive");
  if (!(target_labeled_fraction >= 0.0 && target_labeled_fraction <= 1.0)) {
    throw ConfigError("task " + task_name() + ": target_labeled_fraction outside [0, 1]");
  }
  source->data.validate();
  target->data.validate();
  if (!source->data.has_labels()) throw ContractError("task " + task_name() + ": source is unlabeled");
  if (!target->data.has_labels()) {
    throw ContractError("task " + task_name() + ": target labels are needed for evaluation");
  }
  if (source->data.dim() != target->data.dim()) {
    throw ShapeError("task " + task_name() + ": feature widths differ");
  }
  if (source->data.class_count != target->data.class_count) {
    throw ConfigError("task " + task_name() + ": class counts differ");
  }
  if (source->data.size() == 0 || target->data.size() == 0) {
    throw ContractError("task " + task_name() + ": empty domain");
  }
  algorithm.validate();
}

double evaluate(const ModelBundle& bundle, const Dataset& d) {
  if (!d.has_labels()) throw ContractError("evaluate: dataset " + d.domain_tag + " has no labels");
  if (d.size() == 0) throw ContractError("evaluate: empty dataset");
  const auto pred = argmax_rows(predict_logits(bundle, d.features));
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (static_cast<int>(pred[i]) == (*d.labels)[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(d.size());
}

ModelBundle initial_bundle(const TaskSpec& t, std::uint64_t seed) {
  const Architecture a = make_architecture(t.source->data.dim(), t.source->data.class_count,
                                           t.model.ef_hidden, t.model.feature_dim, t.model.d_hidden);
  return init_bundle(a.ef, a.h, a.d, derive_seed(seed, kInitSalt));
}

SeedResult run_seed(const TaskSpec& t, std::uint64_t seed) {
  t.validate();
  SeedResult res;
  res.seed = seed;

  TrainerState trainer =
      make_trainer(initial_bundle(t, seed), t.optimizer, derive_seed(seed, kTrainerSalt));
  Rng batch_rng(derive_seed(seed, kBatchSalt));
  const std::vector<int> known = known_target_labels(t, seed);
  RunLog log(t, seed);

  const auto* ssrt = std::get_if<SsrtConfig>(&t.algorithm.method);
  std::optional<SafeTrainingState> safe;
  if (ssrt && ssrt->safe_training) {
    safe = make_safe_training(trainer, ssrt->interval, ssrt->collapse_ratio);
  }

  const std::uint64_t total_steps = t.epochs * t.iterations_per_epoch;
  res.curve.push_back(evaluate(trainer.bundle, t.target->data));
  try {
    for (std::size_t e = 0; e < t.epochs; ++e) {
      trainer.epoch = e;
      for (std::size_t it = 0; it < t.iterations_per_epoch; ++it) {
        StepContext ctx;
        ctx.progress = static_cast<double>(trainer.step) / static_cast<double>(total_steps);
        ctx.lr = lr_at(trainer.lr0, ctx.progress, t.optimizer.gamma, t.optimizer.decay);
        ctx.r = safe ? r_schedule(*safe, trainer.step) : 1.0;
        const BatchPair batch =
            sample_balanced_batch(t.source->data, t.target->data, t.batch, batch_rng, known);
        const LossBreakdown b = train_step(t.algorithm, trainer, batch, ctx);
        log.write(b);
        if (safe) safe_training_tick(*safe, trainer, b.diversity);
      }
      res.curve.push_back(evaluate(trainer.bundle, t.target->data));
    }
  } catch (const TrainingError& err) {
    res.failed = true;
    res.failure_step = trainer.step;
    res.failure = err.what();
  }
  if (safe) res.restores = safe->restores;
  summarize(res);

  if (t.save_checkpoints && !t.run_dir.empty()) {
    std::ostringstream rng_state;
    rng_state << trainer.rng;
    const auto path = std::filesystem::path(t.run_dir) /
                      ("checkpoint_" + t.algorithm.name() + "_" + t.task_name() + "_" +
                       std::to_string(seed) + ".txt");
    save_checkpoint(Checkpoint{trainer.bundle, rng_state.str(), trainer.step}, path.string());
  }
  if (t.dump_embeddings && !t.run_dir.empty() && seed == t.seeds.front()) {
    const auto path = std::filesystem::path(t.run_dir) /
                      ("embeddings_" + t.algorithm.name() + "_" + t.task_name() + ".csv");
    dump_embeddings(trainer.bundle, t.source->data, t.target->data, path.string());
  }
  return res;
}

TaskResult run_task(const TaskSpec& t) {
  t.validate();
  const auto start = std::chrono::steady_clock::now();
  TaskResult out;
  out.algorithm = t.algorithm.name();
  out.task = t.task_name();
  out.source_only = t.algorithm.is_source_only();
  for (std::uint64_t s : t.seeds) out.seeds.push_back(run_seed(t, s));
  for (const SeedResult& s : out.seeds) {
    out.mean_best += s.best;
    out.mean_final += s.final;
  }
  out.mean_best /= static_cast<double>(out.seeds.size());
  out.mean_final /= static_cast<double>(out.seeds.size());
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<TaskSpec> expand_matrix(const MatrixSpec& m) {
  if (m.domains.size() < 2) throw ConfigError("matrix: at least two domains are required");
  std::set<std::string> names;
  for (const DomainRef& d : m.domains) {
    if (!d) throw ConfigError("matrix: null domain");
    if (!names.insert(d->name).second) throw ConfigError("matrix: duplicate domain name " + d->name);
  }
  if (!m.optimizers.empty() && m.optimizers.size() != m.algorithms.size()) {
    throw ConfigError("matrix: optimizers must parallel algorithms");
  }
  auto find = [&](const std::string& name) {
    for (const DomainRef& d : m.domains) {
      if (d->name == name) return d;
    }
    throw ConfigError("matrix: unknown domain " + name);
  };

  std::vector<std::pair<DomainRef, DomainRef>> pairs;
  if (m.pairs.empty()) {
    for (const DomainRef& s : m.domains) {
      for (const DomainRef& t : m.domains) {
        if (s != t) pairs.emplace_back(s, t);
      }
    }
  } else {
    for (const auto& [s, t] : m.pairs) pairs.emplace_back(find(s), find(t));
  }

  std::vector<std::pair<AlgorithmConfig, OptimizerConfig>> algos;
  for (std::size_t i = 0; i < m.algorithms.size(); ++i) {
    const AlgorithmConfig& a = m.algorithms[i];
    algos.emplace_back(a, m.optimizers.empty() ? default_optimizer(a) : m.optimizers[i]);
  }
  const auto so = std::find_if(algos.begin(), algos.end(),
                               [](const auto& a) { return a.first.is_source_only(); });
  if (so == algos.end()) {
    const AlgorithmConfig base{SourceOnlyConfig{}, ""};
    algos.insert(algos.begin(), {base, default_optimizer(base)});
  } else {
    std::rotate(algos.begin(), so, so + 1);
  }

  std::vector<TaskSpec> tasks;
  for (const auto& [algo, opt] : algos) {
    for (const auto& [s, t] : pairs) {
      TaskSpec spec = m.base;
      spec.source = s;
      spec.target = t;
      spec.algorithm = algo;
      spec.optimizer = opt;
      spec.validate();
      tasks.push_back(std::move(spec));
    }
  }
  return tasks;
}

std::vector<TaskResult> run_matrix(const MatrixSpec& m) {
  const std::vector<TaskSpec> tasks = expand_matrix(m);
  std::vector<TaskResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = run_task(tasks[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(m.workers, 1, std::max<std::size_t>(tasks.size(), 1));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

void dump_embeddings(const ModelBundle& bundle, const Dataset& source, const Dataset& target,
                     const std::string& path) {
  const Tensor pooled =
      concat_rows(extract_features(bundle, source.features), extract_features(bundle, target.features));
  const Tensor pc = pca2(pooled);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "domain_tag,true_label,pc1,pc2\n";
  std::size_t row = 0;
  for (const Dataset* d : {&source, &target}) {
    for (std::size_t i = 0; i < d->size(); ++i, ++row) {
      const int label = d->has_labels() ? (*d->labels)[i] : -1;
      out << d->domain_tag << ',' << label << ',' << fmt17(pc(row, 0)) << ',' << fmt17(pc(row, 1))
          << '\n';
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace uda
