#pragma once

// Scalar discrepancy and classification losses, all expressed on the tape so
// they share one gradient check.

#include <span>
#include <vector>

#include "uda/ndgraph.hpp"
#include "uda/tensor.hpp"

namespace uda {

// Gaussian kernel family k(x, y) = exp(-|x - y|^2 / (2 sigma^2)). Either a
// fixed list of bandwidths or the median heuristic: sigma = m * median
// pairwise distance of the pooled batch, for each multiplier m.
struct KernelSpec {
  std::vector<double> bandwidths;
  bool median_heuristic = false;
  std::vector<double> multipliers{0.25, 0.5, 1.0, 2.0, 4.0};

  static KernelSpec fixed(std::vector<double> sigmas);
  static KernelSpec median(std::vector<double> multipliers = {0.25, 0.5, 1.0, 2.0, 4.0});
  void validate() const;
};

// Median of the pairwise row distances (not squared). Falls back to 1 when
// the median is zero.
double median_pairwise_distance(const Tensor& pooled);

// Concrete bandwidths for one batch. The result is a plain value: no gradient
// flows through the median.
std::vector<double> resolve_bandwidths(const KernelSpec& k, const Tensor& x, const Tensor& y);

Var cross_entropy(Var logits, std::span<const int> labels);

// Binary cross-entropy of discriminator outputs against domain flags z
// (1 = source, 0 = target), averaged over all 2B rows.
Var domain_adv_loss(Var d_out, std::span<const double> z);

// (D^T D - (1/n)(1^T D)^T (1^T D)) / (n - 1).
Var covariance(Var x);
// |C_S - C_T|_F^2 / (4 d^2).
Var coral_loss(Var source_feats, Var target_feats);

// Biased (V-statistic) squared MMD with a single bandwidth.
Var mmd2(Var x, Var y, double sigma);
// Mean of mmd2 over the bandwidths.
Var mk_mmd2(Var x, Var y, std::span<const double> sigmas);
Var mk_mmd2(Var x, Var y, const KernelSpec& k);

// Row c holds the per-sample weights of class c within one domain; each row
// sums to 1, or is all zero when the class has no mass in the batch.
struct ClassWeights {
  Tensor w;  // C x n

  std::size_t classes() const { return w.rows(); }
  std::size_t samples() const { return w.cols(); }
  bool active(std::size_t c) const;
};

ClassWeights lmmd_weights(std::span<const int> labels, std::size_t classes);
ClassWeights lmmd_weights(const Tensor& probs);

// Class-weighted MMD averaged over classes active in both domains; 0 when no
// class is shared. Multiple bandwidths are averaged as in mk_mmd2.
Var lmmd2(Var xs, Var xt, const ClassWeights& ws, const ClassWeights& wt,
          std::span<const double> sigmas);

// Sum of singular values; the backward pass uses the subgradient U V^T of the
// thin SVD restricted to nonzero singular values.
double nuclear_norm(const Tensor& a);
Tensor nuclear_norm_subgradient(const Tensor& a);
Var nuclear_norm(Var a);

// -(1/B) |A|_*, minimized.
Var bnm_loss(Var probs);

// sum p log(p / q) over all entries, logs clamped; 0 log 0 counts as 0.
Var kl_div(Var p, Var q);
// Row-wise KL as a B x 1 column.
Var kl_rows(Var p, Var q);

// Rows whose maximum probability exceeds eps.
std::vector<std::size_t> confidence_filter(const Tensor& probs, double eps);

// omega * mean_{F[p]} KL(p | p~) + (1 - omega) * mean_{F[p~]} KL(p~ | p).
Var sr_loss(Var p, Var p_tilde, double omega, double eps);
// Same with precomputed filter sets.
Var sr_loss(Var p, Var p_tilde, double omega, std::span<const std::size_t> forward_rows,
            std::span<const std::size_t> backward_rows);

Var entropy_mean(Var probs);

}  // namespace uda
