#include "uda/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uda/error.hpp"

namespace uda {

namespace {

// Orthogonalizes the columns of w (m x n, m >= n) in place, accumulating the
// rotations into v (n x n).
void orthogonalize_columns(Tensor& w, Tensor& v, const SvdOptions& opts) {
  const std::size_t m = w.rows(), n = w.cols();
  double residual = 0.0;
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    residual = 0.0;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        if (alpha == 0.0 || beta == 0.0 || gamma == 0.0) continue;
        const double off = std::abs(gamma) / std::sqrt(alpha * beta);
        residual = std::max(residual, off);
        if (off <= opts.tolerance) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    if (!rotated) return;
  }
  throw NumericError("svd_jacobi: no convergence after " + std::to_string(opts.max_sweeps) +
                     " sweeps, residual " + std::to_string(residual));
}

Svd svd_tall(const Tensor& a, const SvdOptions& opts) {
  const std::size_t m = a.rows(), n = a.cols();
  Tensor w = a;
  Tensor v = Tensor::identity(n);
  orthogonalize_columns(w, v, opts);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    norms[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  Svd out{Tensor(m, n), std::vector<double>(n), Tensor(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.s[k] = norms[j];
    if (norms[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.u(i, k) = w(i, j) / norms[j];
    }
    for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v(i, j);
  }
  return out;
}

}  // namespace

Svd svd_jacobi(const Tensor& a, const SvdOptions& opts) {
  if (a.size() == 0) return Svd{};
  if (!a.all_finite()) throw NumericError("svd_jacobi: non-finite input");
  if (a.rows() >= a.cols()) return svd_tall(a, opts);
  Svd t = svd_tall(transpose(a), opts);
  return Svd{std::move(t.v), std::move(t.s), std::move(t.u)};
}

}  // namespace uda
