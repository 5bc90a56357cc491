#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uda/datagen.hpp"
#include "uda/divergences.hpp"
#include "uda/models.hpp"

namespace uda {

// Per-method trade-off weights. `lam` multiplies the adaptation term; when
// `ramp` is set it is further scaled by progress_ramp(p) over training.
struct SourceOnlyConfig {};

struct CoralConfig {
  double lam = 1.0;
  bool ramp = false;
};

struct DanConfig {
  double lam = 1.0;
  bool ramp = false;
  KernelSpec kernel = KernelSpec::median();
};

struct DannConfig {
  double lam = 1.0;
  GrlCoefficient grl;
};

struct DsanConfig {
  double lam = 1.0;
  bool ramp = false;
  KernelSpec kernel = KernelSpec::median();
};

struct BnmConfig {
  double lam = 1.0;
  bool ramp = false;
};

struct SsrtConfig {
  double alpha = 1.0;   // adversarial weight
  double beta = 0.2;    // self-refinement weight
  double omega = 0.5;   // forward/backward KL mix
  double eps = 0.8;     // confidence filter threshold
  double lambda_max = 0.3;
  std::uint64_t interval = 100;  // safe-training period T, in steps
  std::size_t perturb_layer = 0;
  double collapse_ratio = 0.5;
  bool safe_training = true;
  GrlCoefficient grl;
};

using MethodConfig = std::variant<SourceOnlyConfig, CoralConfig, DanConfig, DannConfig, DsanConfig,
                                  BnmConfig, SsrtConfig>;

struct AlgorithmConfig {
  MethodConfig method;
  std::string label;  // display name; defaults to method_name()

  std::string method_name() const;
  std::string name() const { return label.empty() ? method_name() : label; }
  bool is_source_only() const { return std::holds_alternative<SourceOnlyConfig>(method); }
  void validate() const;
};

// Same method with every adaptation coefficient set to zero.
AlgorithmConfig without_adaptation(const AlgorithmConfig& cfg);

struct OptimizerConfig {
  double lr0 = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double gamma = 10.0;
  double decay = 0.75;
};

// Learning rate and weight decay defaults per method, from the published
// implementation table.
OptimizerConfig default_optimizer(const AlgorithmConfig& cfg);

// lr0 * (1 + gamma p)^(-decay).
double lr_at(double lr0, double progress, double gamma, double decay);

struct TrainerState {
  ModelBundle bundle;
  std::vector<Tensor> velocity;  // mirrors bundle.params()
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  Rng rng;
  double lr0 = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

TrainerState make_trainer(ModelBundle bundle, const OptimizerConfig& opt, std::uint64_t seed);

// v <- momentum v + (g + wd theta); theta <- theta - lr v. Throws
// TrainingError (state untouched) on a non-finite gradient.
void sgd_step(TrainerState& s, std::span<const Tensor> grads, double lr);

struct StepContext {
  double progress = 0.0;  // fraction of training completed, in [0, 1]
  double lr = 1e-2;
  double r = 1.0;         // safe-training scale for SSRT weights
};

// Values a step derives from the current batch but does not differentiate
// through. build_objective fills any that are missing; passing a filled
// StepAux back in reproduces the same objective (used by gradient checks).
struct StepAux {
  std::optional<std::vector<double>> bandwidths;
  std::optional<ClassWeights> target_weights;
  std::optional<double> lambda;
  std::optional<std::vector<std::size_t>> partner;
  std::optional<Tensor> perturb_difference;  // b[partner] - b, held fixed under stop_gradient
  std::optional<std::vector<std::size_t>> forward_rows;
  std::optional<std::vector<std::size_t>> backward_rows;
};

// total = ce_term + adapt_weight * adapt_term + sr_weight * sr_term. When
// adapt_reversed is set the adaptation term reaches e_f through a gradient
// reversal layer with coefficient grl_coeff, so e_f receives
// -grl_coeff * adapt_weight * d(adapt_term) while D receives the plain gradient.
struct Objective {
  Var total;
  Var ce_term;
  Var adapt_term;  // invalid for SourceOnly
  Var sr_term;     // invalid unless SSRT
  double adapt_weight = 0.0;
  double sr_weight = 0.0;
  bool adapt_reversed = false;
  double grl_coeff = 0.0;
  double ce = 0.0;
  double adapt = 0.0;
  double sr = 0.0;
  Tensor target_logits;  // B x C, for the diversity measure
};

Objective build_objective(const AlgorithmConfig& cfg, const BundleVars& vars,
                          const BatchPair& batch, const StepContext& ctx, StepAux& aux, Rng& rng);

// Run-log record.
struct LossBreakdown {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double ce = 0.0;
  double adapt = 0.0;
  double sr = 0.0;
  double r = 1.0;
  std::size_t diversity = 0;
};

// One optimizer step on the method's composite loss. A non-finite loss or
// gradient throws TrainingError and leaves the state unchanged.
LossBreakdown train_step(const AlgorithmConfig& cfg, TrainerState& state, const BatchPair& batch,
                         const StepContext& ctx);

// Number of distinct argmax classes; ties go to the lowest class index.
std::size_t diversity(const Tensor& logits);

// Snapshot/restore guard against prediction collapse.
struct SafeTrainingState {
  double r = 0.0;
  std::uint64_t t_r = 0;
  std::uint64_t ramp_steps = 100;  // T_r
  std::uint64_t interval = 100;    // T
  double collapse_ratio = 0.5;     // delta
  TrainerState snapshot;
  double interval_sum = 0.0;
  std::uint64_t interval_count = 0;
  double best_interval_mean = 0.0;
  std::vector<double> history;  // mean diversity per completed interval
  std::uint64_t restores = 0;
};

// Takes the step-0 snapshot; ramp_steps 0 means ramp_steps = interval.
SafeTrainingState make_safe_training(const TrainerState& initial, std::uint64_t interval,
                                     double collapse_ratio, std::uint64_t ramp_steps = 0);

// sin(pi (t - t_r) / (2 T_r)) on the ramp, 1 afterwards.
double r_schedule(const SafeTrainingState& s, std::uint64_t step);

// Call once per step with the batch diversity. At each interval boundary the
// interval mean is compared against collapse_ratio * best mean so far: below
// it, the trainer's parameters and momentum are restored from the snapshot
// and the ramp restarts at the current step; otherwise a new snapshot is
// taken. Returns true when a restore happened.
bool safe_training_tick(SafeTrainingState& s, TrainerState& trainer, std::size_t div);

}  // namespace uda
