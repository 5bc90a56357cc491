#pragma once

// JSON benchmark configuration. Unset fields take the documented defaults;
// unknown keys are rejected.

#include <string>
#include <utility>
#include <vector>

#include "uda/datagen.hpp"
#include "uda/harness.hpp"

namespace uda {

struct BenchConfig {
  std::string name = "bench";
  MatrixSpec matrix;           // algorithms, per-algorithm optimizers, domains, pairs, trainer base
  std::string resolved_json;   // every field, defaults filled in
};

// Relative csv paths resolve against base_dir.
BenchConfig parse_bench_config(const std::string& json_text, const std::string& base_dir = ".");
BenchConfig load_bench_config(const std::string& path);

ShiftSpec parse_shift_spec(const std::string& json_text);
std::string shift_spec_json(const ShiftSpec& s);

// The method table used by "algorithms" entries, for callers that build
// configs in code.
AlgorithmConfig parse_algorithm(const std::string& json_text);

}  // namespace uda
