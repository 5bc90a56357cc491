#pragma once

#include <cmath>
#include <random>

#include "uda/datagen.hpp"
#include "uda/tensor.hpp"

namespace uda::test {

inline Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

inline Tensor random_stochastic(std::size_t r, std::size_t c, Rng& rng) {
  return softmax_rows(random_tensor(r, c, rng, -2.0, 2.0));
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace uda::test
