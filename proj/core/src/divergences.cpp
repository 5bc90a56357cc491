#include "uda/divergences.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uda/error.hpp"
#include "uda/linalg.hpp"

namespace uda {

KernelSpec KernelSpec::fixed(std::vector<double> sigmas) {
  KernelSpec k;
  k.bandwidths = std::move(sigmas);
  return k;
}

KernelSpec KernelSpec::median(std::vector<double> multipliers) {
  KernelSpec k;
  k.median_heuristic = true;
  k.multipliers = std::move(multipliers);
  return k;
}

void KernelSpec::validate() const {
  const auto& list = median_heuristic ? multipliers : bandwidths;
  if (list.empty()) throw ConfigError("kernel: empty bandwidth list");
  for (double s : list) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("kernel: bandwidths must be finite and > 0");
  }
}

double median_pairwise_distance(const Tensor& pooled) {
  std::vector<double> d;
  const std::size_t n = pooled.rows();
  d.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < pooled.cols(); ++k) {
        const double diff = pooled(i, k) - pooled(j, k);
        s += diff * diff;
      }
      d.push_back(std::sqrt(s));
    }
  }
  if (d.empty()) return 1.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d.begin(), d.begin() + mid));
  }
  return med > 0.0 && std::isfinite(med) ? med : 1.0;
}

std::vector<double> resolve_bandwidths(const KernelSpec& k, const Tensor& x, const Tensor& y) {
  k.validate();
  if (!k.median_heuristic) return k.bandwidths;
  const double base = median_pairwise_distance(concat_rows(x, y));
  std::vector<double> out;
  for (double m : k.multipliers) out.push_back(m * base);
  return out;
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const std::size_t b = logits.rows(), c = logits.cols();
  if (labels.size() != b) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     logits.shape().str());
  }
  Tensor onehot(b, c);
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw RangeError("cross_entropy: label " + std::to_string(labels[i]) + " outside [0," +
                       std::to_string(c) + ")");
    }
    onehot(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  Tape& t = logits.tape();
  return scale(sum(mul(t.constant(std::move(onehot)), log_softmax_rows(logits))),
               -1.0 / static_cast<double>(b));
}

Var domain_adv_loss(Var d_out, std::span<const double> z) {
  if (d_out.cols() != 1 || d_out.rows() != z.size()) {
    throw ShapeError("domain_adv_loss: outputs " + d_out.shape().str() + " vs " +
                     std::to_string(z.size()) + " domain flags");
  }
  const std::size_t n = z.size();
  Tape& t = d_out.tape();
  Tensor zt(n, 1, std::vector<double>(z.begin(), z.end()));
  Tensor not_z = Tensor::ones(n, 1) - zt;
  Var one_minus_d = sub(t.constant(Tensor::ones(n, 1)), d_out);
  Var ll = add(mul(t.constant(std::move(zt)), log_clamped(d_out)),
               mul(t.constant(std::move(not_z)), log_clamped(one_minus_d)));
  return scale(sum(ll), -1.0 / static_cast<double>(n));
}

Var covariance(Var x) {
  const std::size_t n = x.rows();
  if (n < 2) throw ContractError("covariance: need at least 2 rows, got " + std::to_string(n));
  Tape& t = x.tape();
  Var gram = matmul(transpose(x), x);
  Var colsum = matmul(t.constant(Tensor::ones(1, n)), x);
  Var outer = scale(matmul(transpose(colsum), colsum), 1.0 / static_cast<double>(n));
  return scale(sub(gram, outer), 1.0 / static_cast<double>(n - 1));
}

Var coral_loss(Var source_feats, Var target_feats) {
  if (source_feats.cols() != target_feats.cols()) {
    throw ShapeError("coral_loss: feature widths differ, " + source_feats.shape().str() + " vs " +
                     target_feats.shape().str());
  }
  const double d = static_cast<double>(source_feats.cols());
  return scale(frobenius_sq(sub(covariance(source_feats), covariance(target_feats))),
               1.0 / (4.0 * d * d));
}

namespace {

Var gaussian(Var sqd, double sigma) { return exp(scale(sqd, -1.0 / (2.0 * sigma * sigma))); }

void check_widths(Var x, Var y, const char* op) {
  if (x.cols() != y.cols()) {
    throw ShapeError(std::string(op) + ": feature widths differ, " + x.shape().str() + " vs " +
                     y.shape().str());
  }
  if (x.rows() == 0 || y.rows() == 0) throw ContractError(std::string(op) + ": empty sample");
}

struct Distances {
  Var xx, yy, xy;
};

Distances distances(Var x, Var y) { return {sq_dist(x, x), sq_dist(y, y), sq_dist(x, y)}; }

Var mmd2_from(const Distances& d, double sigma) {
  return sub(add(mean(gaussian(d.xx, sigma)), mean(gaussian(d.yy, sigma))),
             scale(mean(gaussian(d.xy, sigma)), 2.0));
}

}  // namespace

Var mmd2(Var x, Var y, double sigma) {
  check_widths(x, y, "mmd2");
  if (!(sigma > 0.0)) throw ConfigError("mmd2: sigma must be > 0");
  return mmd2_from(distances(x, y), sigma);
}

Var mk_mmd2(Var x, Var y, std::span<const double> sigmas) {
  check_widths(x, y, "mk_mmd2");
  if (sigmas.empty()) throw ConfigError("mk_mmd2: empty bandwidth list");
  const Distances d = distances(x, y);
  Var total = mmd2_from(d, sigmas[0]);
  for (std::size_t k = 1; k < sigmas.size(); ++k) total = add(total, mmd2_from(d, sigmas[k]));
  return scale(total, 1.0 / static_cast<double>(sigmas.size()));
}

Var mk_mmd2(Var x, Var y, const KernelSpec& k) {
  const auto sigmas = resolve_bandwidths(k, x.value(), y.value());
  return mk_mmd2(x, y, sigmas);
}

bool ClassWeights::active(std::size_t c) const {
  for (std::size_t i = 0; i < w.cols(); ++i)
    if (w(c, i) != 0.0) return true;
  return false;
}

ClassWeights lmmd_weights(std::span<const int> labels, std::size_t classes) {
  Tensor w(classes, labels.size());
  std::vector<double> count(classes, 0.0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw RangeError("lmmd_weights: label " + std::to_string(y) + " outside [0," +
                       std::to_string(classes) + ")");
    }
    count[static_cast<std::size_t>(y)] += 1.0;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    w(c, i) = 1.0 / count[c];
  }
  return {std::move(w)};
}

ClassWeights lmmd_weights(const Tensor& probs) {
  const std::size_t n = probs.rows(), c = probs.cols();
  Tensor w(c, n);
  for (std::size_t k = 0; k < c; ++k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += probs(i, k);
    if (total <= 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) w(k, i) = probs(i, k) / total;
  }
  return {std::move(w)};
}

Var lmmd2(Var xs, Var xt, const ClassWeights& ws, const ClassWeights& wt,
          std::span<const double> sigmas) {
  check_widths(xs, xt, "lmmd2");
  if (ws.classes() != wt.classes()) {
    throw ShapeError("lmmd2: class counts differ, " + std::to_string(ws.classes()) + " vs " +
                     std::to_string(wt.classes()));
  }
  if (ws.samples() != xs.rows() || wt.samples() != xt.rows()) {
    throw ShapeError("lmmd2: weight columns do not match sample counts");
  }
  if (sigmas.empty()) throw ConfigError("lmmd2: empty bandwidth list");
  const std::size_t c = ws.classes();
  Tensor mask(c, c);
  std::size_t shared = 0;
  for (std::size_t k = 0; k < c; ++k) {
    if (ws.active(k) && wt.active(k)) {
      mask(k, k) = 1.0;
      ++shared;
    }
  }
  Tape& t = xs.tape();
  if (shared == 0) return t.constant(Tensor::scalar(0.0));

  Var w_s = t.constant(ws.w);
  Var w_t = t.constant(wt.w);
  Var w_s_tr = t.constant(transpose(ws.w));
  Var w_t_tr = t.constant(transpose(wt.w));
  Var m = t.constant(std::move(mask));
  const Distances d = distances(xs, xt);
  Var total;
  for (std::size_t k = 0; k < sigmas.size(); ++k) {
    Var ss = matmul(matmul(w_s, gaussian(d.xx, sigmas[k])), w_s_tr);
    Var tt = matmul(matmul(w_t, gaussian(d.yy, sigmas[k])), w_t_tr);
    Var st = matmul(matmul(w_s, gaussian(d.xy, sigmas[k])), w_t_tr);
    Var per_class = sum(mul(m, sub(add(ss, tt), scale(st, 2.0))));
    total = k == 0 ? per_class : add(total, per_class);
  }
  return scale(total, 1.0 / (static_cast<double>(shared) * static_cast<double>(sigmas.size())));
}

double nuclear_norm(const Tensor& a) {
  const Svd s = svd_jacobi(a);
  double total = 0.0;
  for (double v : s.s) total += v;
  return total;
}

namespace {

Tensor subgradient_from(const Svd& s, std::size_t rows, std::size_t cols) {
  Tensor g(rows, cols);
  const double tol = s.s.empty() ? 0.0 : s.s.front() * 1e-12;
  for (std::size_t k = 0; k < s.s.size(); ++k) {
    if (s.s[k] <= tol) continue;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) g(i, j) += s.u(i, k) * s.v(j, k);
  }
  return g;
}

}  // namespace

Tensor nuclear_norm_subgradient(const Tensor& a) {
  return subgradient_from(svd_jacobi(a), a.rows(), a.cols());
}

Var nuclear_norm(Var a) {
  const Svd s = svd_jacobi(a.value());
  double total = 0.0;
  for (double v : s.s) total += v;
  Tensor sub = subgradient_from(s, a.rows(), a.cols());
  return a.tape().record(Tensor::scalar(total), {a.id()},
                         [sub = std::move(sub)](const Tape&, const Tensor& g,
                                                std::span<Tensor* const> pg) {
                           *pg[0] += sub * g[0];
                         });
}

Var bnm_loss(Var probs) {
  return scale(nuclear_norm(probs), -1.0 / static_cast<double>(probs.rows()));
}

Var kl_div(Var p, Var q) {
  if (p.shape() != q.shape()) {
    throw ShapeError("kl_div: " + p.shape().str() + " vs " + q.shape().str());
  }
  return sum(mul(p, sub(log_clamped(p), log_clamped(q))));
}

Var kl_rows(Var p, Var q) {
  if (p.shape() != q.shape()) {
    throw ShapeError("kl_rows: " + p.shape().str() + " vs " + q.shape().str());
  }
  Tape& t = p.tape();
  return matmul(mul(p, sub(log_clamped(p), log_clamped(q))), t.constant(Tensor::ones(p.cols(), 1)));
}

std::vector<std::size_t> confidence_filter(const Tensor& probs, double eps) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto r = probs.row(i);
    if (*std::max_element(r.begin(), r.end()) > eps) keep.push_back(i);
  }
  return keep;
}

Var sr_loss(Var p, Var p_tilde, double omega, std::span<const std::size_t> forward_rows,
            std::span<const std::size_t> backward_rows) {
  if (p.shape() != p_tilde.shape()) {
    throw ShapeError("sr_loss: " + p.shape().str() + " vs " + p_tilde.shape().str());
  }
  Tape& t = p.tape();
  Var total = t.constant(Tensor::scalar(0.0));
  if (!forward_rows.empty()) {
    total = add(total, scale(mean(gather_rows(kl_rows(p, p_tilde), forward_rows)), omega));
  }
  if (!backward_rows.empty()) {
    total = add(total, scale(mean(gather_rows(kl_rows(p_tilde, p), backward_rows)), 1.0 - omega));
  }
  return total;
}

Var sr_loss(Var p, Var p_tilde, double omega, double eps) {
  const auto fwd = confidence_filter(p.value(), eps);
  const auto bwd = confidence_filter(p_tilde.value(), eps);
  return sr_loss(p, p_tilde, omega, fwd, bwd);
}

Var entropy_mean(Var probs) {
  return scale(sum(mul(probs, log_clamped(probs))), -1.0 / static_cast<double>(probs.rows()));
}

}  // namespace uda
