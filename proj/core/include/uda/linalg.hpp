#pragma once

#include <vector>

#include "uda/tensor.hpp"

namespace uda {

// Thin SVD a = u * diag(s) * v^T with k = min(rows, cols). Singular values are
// sorted descending; columns of u belonging to zero singular values are zero.
struct Svd {
  Tensor u;               // rows x k
  std::vector<double> s;  // k
  Tensor v;               // cols x k
};

struct SvdOptions {
  int max_sweeps = 80;
  double tolerance = 1e-15;
};

// One-sided (Hestenes) Jacobi. Throws NumericError with the final
// off-diagonal residual if the sweep cap is reached.
Svd svd_jacobi(const Tensor& a, const SvdOptions& opts = {});

}  // namespace uda
