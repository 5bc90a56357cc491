#pragma once

// Central finite-difference checks of tape gradients.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uda/algorithms.hpp"
#include "uda/ndgraph.hpp"

namespace uda {

// Builds a scalar loss from the given inputs on a fresh tape. Must be a pure
// function of the input values.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;  // max |g - fd| / max(1, |g|)
  std::size_t entries = 0;
  std::size_t worst_input = 0;
  std::size_t worst_entry = 0;
};

GradCheckResult check_gradients(const ScalarGraph& f, std::span<const Tensor> inputs,
                                double step = 1e-5);

// Checks the parameter update direction of one training objective. Gradients
// reaching e_f and h are compared against finite differences of
// ce + adapt_weight * s * adapt + sr_weight * sr, where s = -grl_coeff for
// adversarial methods and 1 otherwise; D is compared against the full total.
// Batch-derived constants (bandwidths, pseudo-label weights, perturbation
// draws, confidence sets) are frozen at the unperturbed point.
GradCheckResult check_objective_gradients(const AlgorithmConfig& cfg, const ModelBundle& bundle,
                                          const BatchPair& batch, const StepContext& ctx,
                                          std::uint64_t seed, double step = 1e-5);

struct GradCheckCase {
  std::string name;
  std::size_t instances = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckSuiteOptions {
  std::uint64_t seed = 20240601;
  std::size_t instances = 20;
  double step = 1e-5;
  double tolerance = 1e-4;
};

// Every tape primitive, every composite loss and every method's training
// objective, each on `instances` random inputs.
std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& opts = {});

}  // namespace uda
