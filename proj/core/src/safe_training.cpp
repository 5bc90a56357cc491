#include <cmath>
#include <numbers>

#include "uda/algorithms.hpp"
#include "uda/error.hpp"

namespace uda {

SafeTrainingState make_safe_training(const TrainerState& initial, std::uint64_t interval,
                                     double collapse_ratio, std::uint64_t ramp_steps) {
  if (interval == 0) throw ConfigError("safe training: interval must be >= 1");
  SafeTrainingState s;
  s.interval = interval;
  s.ramp_steps = ramp_steps == 0 ? interval : ramp_steps;
  s.collapse_ratio = collapse_ratio;
  s.t_r = initial.step;
  s.snapshot = initial;
  s.r = r_schedule(s, initial.step);
  return s;
}

double r_schedule(const SafeTrainingState& s, std::uint64_t step) {
  if (step < s.t_r) throw ContractError("r_schedule: step precedes t_r");
  const std::uint64_t since = step - s.t_r;
  if (since >= s.ramp_steps) return 1.0;
  return std::sin(std::numbers::pi * static_cast<double>(since) /
                  (2.0 * static_cast<double>(s.ramp_steps)));
}

bool safe_training_tick(SafeTrainingState& s, TrainerState& trainer, std::size_t div) {
  s.interval_sum += static_cast<double>(div);
  ++s.interval_count;
  bool restored = false;
  if (s.interval_count >= s.interval) {
    const double m = s.interval_sum / static_cast<double>(s.interval_count);
    s.history.push_back(m);
    if (s.best_interval_mean > 0.0 && m < s.collapse_ratio * s.best_interval_mean) {
      trainer.bundle = s.snapshot.bundle;
      trainer.velocity = s.snapshot.velocity;
      s.t_r = trainer.step;
      ++s.restores;
      restored = true;
    } else {
      s.best_interval_mean = std::max(s.best_interval_mean, m);
      s.snapshot = trainer;
    }
    s.interval_sum = 0.0;
    s.interval_count = 0;
  }
  s.r = r_schedule(s, trainer.step);
  return restored;
}

}  // namespace uda
