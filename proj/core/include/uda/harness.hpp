#pragma once

// Task orchestration: train one algorithm on one ordered domain pair across
// seeds, and the all-pairs matrix on top of it.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uda/algorithms.hpp"
#include "uda/datagen.hpp"
#include "uda/models.hpp"

namespace uda {

struct Domain {
  std::string name;
  Dataset data;
};

using DomainRef = std::shared_ptr<const Domain>;

// Widths of the hidden layers; input and class count come from the data.
struct ModelSettings {
  std::vector<std::size_t> ef_hidden{64};
  std::size_t feature_dim = 32;
  std::vector<std::size_t> d_hidden{16};
};

struct TaskSpec {
  DomainRef source;
  DomainRef target;
  AlgorithmConfig algorithm;
  OptimizerConfig optimizer;
  ModelSettings model;
  std::vector<std::uint64_t> seeds{0};
  std::size_t epochs = 10;
  std::size_t iterations_per_epoch = 50;
  std::size_t batch = 32;
  double target_labeled_fraction = 0.0;

  std::string run_dir;            // run logs and checkpoints go here; empty = none
  bool save_checkpoints = false;  // final bundle per seed
  bool dump_embeddings = false;   // first seed's final bundle, PCA-2 of both domains

  std::string task_name() const;  // "<source>_to_<target>"
  void validate() const;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<double> curve;  // target accuracy before training, then after each epoch
  double best = 0.0;
  double final = 0.0;
  bool failed = false;
  std::uint64_t failure_step = 0;
  std::string failure;
  std::uint64_t restores = 0;  // SSRT safe-training rollbacks
};

struct TaskResult {
  std::string algorithm;
  std::string task;
  bool source_only = false;
  std::vector<SeedResult> seeds;
  double mean_best = 0.0;
  double mean_final = 0.0;
  double wall_seconds = 0.0;
};

// Fraction of rows whose argmax prediction matches the label.
double evaluate(const ModelBundle& bundle, const Dataset& d);

// The bundle a seed starts from; shared by every algorithm for that seed.
ModelBundle initial_bundle(const TaskSpec& t, std::uint64_t seed);

SeedResult run_seed(const TaskSpec& t, std::uint64_t seed);
TaskResult run_task(const TaskSpec& t);

struct MatrixSpec {
  std::vector<DomainRef> domains;
  std::vector<AlgorithmConfig> algorithms;
  // Optimizer per algorithm, parallel to `algorithms`. Empty = method defaults.
  std::vector<OptimizerConfig> optimizers;
  // Ordered (source, target) names. Empty = every ordered pair.
  std::vector<std::pair<std::string, std::string>> pairs;
  TaskSpec base;  // source/target/algorithm/optimizer ignored
  std::size_t workers = 1;
};

// Tasks in output order: algorithms (SourceOnly first) x pairs.
std::vector<TaskSpec> expand_matrix(const MatrixSpec& m);
std::vector<TaskResult> run_matrix(const MatrixSpec& m);

// PCA-2 of the pooled e_f features: domain_tag,true_label,pc1,pc2 per row.
void dump_embeddings(const ModelBundle& bundle, const Dataset& source, const Dataset& target,
                     const std::string& path);

}  // namespace uda
