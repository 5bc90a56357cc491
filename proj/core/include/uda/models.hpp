#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "uda/ndgraph.hpp"
#include "uda/tensor.hpp"

namespace uda {

// Widths from input to output; relu between layers, linear output.
struct LayerSpec {
  std::vector<std::size_t> widths;

  std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  std::size_t input() const { return widths.front(); }
  std::size_t output() const { return widths.back(); }
  void validate(const std::string& name) const;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Mlp {
  LayerSpec spec;
  std::vector<Tensor> weights;  // layer l: widths[l] x widths[l+1]
  std::vector<Tensor> biases;   // layer l: 1 x widths[l+1]
  friend bool operator==(const Mlp&, const Mlp&) = default;
};

// Feature extractor, label classifier and domain discriminator.
struct ModelBundle {
  Mlp ef;
  Mlp h;
  Mlp d;

  std::size_t input_dim() const { return ef.spec.input(); }
  std::size_t feature_dim() const { return ef.spec.output(); }
  std::size_t class_count() const { return h.spec.output(); }

  // Every parameter tensor in a fixed order: ef, h, d; weight then bias per layer.
  std::vector<Tensor*> params();
  std::vector<const Tensor*> params() const;
  std::vector<std::string> param_names() const;

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

struct Architecture {
  LayerSpec ef;
  LayerSpec h;
  LayerSpec d;
};

// e_f = [input, hidden..., feature], h = [feature, classes], D = [feature, d_hidden..., 1].
Architecture make_architecture(std::size_t input_dim, std::size_t classes,
                               std::vector<std::size_t> ef_hidden = {64},
                               std::size_t feature_dim = 32,
                               std::vector<std::size_t> d_hidden = {16});

// Glorot-uniform weights, zero biases; deterministic in seed.
ModelBundle init_bundle(const LayerSpec& ef, const LayerSpec& h, const LayerSpec& d,
                        std::uint64_t seed);

// Bundle parameters placed on a tape, in ModelBundle::params() order.
struct BundleVars {
  std::vector<Var> ef_w, ef_b, h_w, h_b, d_w, d_b;
  std::vector<Var> all() const;
};

// trainable=false records the parameters as constants.
BundleVars attach(const ModelBundle& m, Tape& tape, bool trainable = true);
// Groups existing vars (in ModelBundle::params() order) by the layout of m.
BundleVars bind_vars(const ModelBundle& m, std::span<const Var> params);

// Hidden-state mixing b + lambda * stop_gradient(b[partner] - b), applied to
// the pre-activation of e_f layer `layer`.
struct Perturbation {
  std::size_t layer = 0;
  double lambda = 0.0;
  std::span<const std::size_t> partner;
  // When set, used in place of b[partner] - b (gradient checks freeze it).
  const Tensor* fixed_difference = nullptr;
};

struct EfOutput {
  Var features;
  std::vector<Var> pre_activations;  // one per e_f layer, before the relu
  Tensor difference;                 // b[partner] - b at the perturbed layer, if any
};

EfOutput ef_forward(const BundleVars& m, Var x, const Perturbation* perturb = nullptr);
// Raw logits B x C.
Var classify(const BundleVars& m, Var feats);
// Sigmoid probabilities clamped to [kDiscClamp, 1 - kDiscClamp].
Var discriminate(const BundleVars& m, Var feats);

inline constexpr double kDiscClamp = 1e-7;

// Gradient reversal: identity forward, gradient times -coeff backward.
Var grl(Var x, double coeff);

struct GrlCoefficient {
  enum class Schedule { kConstant, kRamp };
  double value = 1.0;
  Schedule schedule = Schedule::kConstant;
  double gamma = 10.0;

  // value for kConstant; value * (2 / (1 + exp(-gamma p)) - 1) for kRamp.
  double at(double progress) const;
};

// 2 / (1 + exp(-gamma p)) - 1, the usual adaptation warm-up.
double progress_ramp(double progress, double gamma = 10.0);

// Untracked inference helpers.
Tensor extract_features(const ModelBundle& m, const Tensor& x);
Tensor predict_logits(const ModelBundle& m, const Tensor& x);

// Versioned text checkpoint; doubles are written with 17 significant digits
// so a save/load cycle is exact.
struct Checkpoint {
  ModelBundle bundle;
  std::string rng_state;
  std::uint64_t step = 0;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace uda
