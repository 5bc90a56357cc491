#include "uda/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uda/error.hpp"
#include "visit.hpp"

namespace uda {

namespace {

void require_nonneg(double v, const char* what) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be finite and >= 0");
  }
}

void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

}  // namespace

std::string AlgorithmConfig::method_name() const {
  return std::visit(overloaded{
                        [](const SourceOnlyConfig&) { return "source_only"; },
                        [](const CoralConfig&) { return "coral"; },
                        [](const DanConfig&) { return "dan"; },
                        [](const DannConfig&) { return "dann"; },
                        [](const DsanConfig&) { return "dsan"; },
                        [](const BnmConfig&) { return "bnm"; },
                        [](const SsrtConfig&) { return "ssrt"; },
                    },
                    method);
}

void AlgorithmConfig::validate() const {
  std::visit(overloaded{
                 [](const SourceOnlyConfig&) {},
                 [](const CoralConfig& c) { require_nonneg(c.lam, "coral.lam"); },
                 [](const DanConfig& c) {
                   require_nonneg(c.lam, "dan.lam");
                   c.kernel.validate();
                 },
                 [](const DannConfig& c) {
                   require_nonneg(c.lam, "dann.lam");
                   require_nonneg(c.grl.value, "dann.grl");
                 },
                 [](const DsanConfig& c) {
                   require_nonneg(c.lam, "dsan.lam");
                   c.kernel.validate();
                 },
                 [](const BnmConfig& c) { require_nonneg(c.lam, "bnm.lam"); },
                 [](const SsrtConfig& c) {
                   require_nonneg(c.alpha, "ssrt.alpha");
                   require_nonneg(c.beta, "ssrt.beta");
                   require_nonneg(c.lambda_max, "ssrt.lambda_max");
                   require_nonneg(c.grl.value, "ssrt.grl");
                   require_unit(c.omega, "ssrt.omega");
                   if (!(c.eps >= 0.0 && c.eps < 1.0)) throw ConfigError("ssrt.eps must lie in [0, 1)");
                   if (c.interval == 0) throw ConfigError("ssrt.interval must be >= 1");
                   if (!(c.collapse_ratio > 0.0 && c.collapse_ratio < 1.0)) {
                     throw ConfigError("ssrt.collapse_ratio must lie in (0, 1)");
                   }
                 },
             },
             method);
}

AlgorithmConfig without_adaptation(const AlgorithmConfig& cfg) {
  AlgorithmConfig out = cfg;
  std::visit(overloaded{
                 [](SourceOnlyConfig&) {},
                 [](CoralConfig& c) { c.lam = 0.0; },
                 [](DanConfig& c) { c.lam = 0.0; },
                 [](DannConfig& c) { c.lam = 0.0; },
                 [](DsanConfig& c) { c.lam = 0.0; },
                 [](BnmConfig& c) { c.lam = 0.0; },
                 [](SsrtConfig& c) {
                   c.alpha = 0.0;
                   c.beta = 0.0;
                 },
             },
             out.method);
  return out;
}

OptimizerConfig default_optimizer(const AlgorithmConfig& cfg) {
  OptimizerConfig o;
  std::visit(overloaded{
                 [&](const SourceOnlyConfig&) { o.lr0 = 1e-2; },
                 [&](const CoralConfig&) { o.lr0 = 3e-3; },
                 [&](const DanConfig&) { o.lr0 = 1e-2; },
                 [&](const DannConfig&) {
                   o.lr0 = 1e-2;
                   o.weight_decay = 1e-3;
                 },
                 [&](const DsanConfig&) { o.lr0 = 1e-2; },
                 [&](const BnmConfig&) { o.lr0 = 1e-3; },
                 [&](const SsrtConfig&) { o.lr0 = 1e-3; },
             },
             cfg.method);
  return o;
}

double lr_at(double lr0, double progress, double gamma, double decay) {
  return lr0 * std::pow(1.0 + gamma * progress, -decay);
}

TrainerState make_trainer(ModelBundle bundle, const OptimizerConfig& opt, std::uint64_t seed) {
  TrainerState s;
  s.bundle = std::move(bundle);
  for (const Tensor* p : s.bundle.params()) s.velocity.emplace_back(p->rows(), p->cols());
  s.rng.seed(seed);
  s.lr0 = opt.lr0;
  s.momentum = opt.momentum;
  s.weight_decay = opt.weight_decay;
  return s;
}

void sgd_step(TrainerState& s, std::span<const Tensor> grads, double lr) {
  auto params = s.bundle.params();
  if (grads.size() != params.size()) {
    throw ShapeError("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  const auto names = s.bundle.param_names();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape()) {
      throw ShapeError("sgd_step: gradient for " + names[i] + " has shape " +
                       grads[i].shape().str() + ", parameter is " + params[i]->shape().str());
    }
    if (!grads[i].all_finite()) throw TrainingError("non-finite gradient for " + names[i]);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& theta = *params[i];
    Tensor& v = s.velocity[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < theta.size(); ++k) {
      v[k] = s.momentum * v[k] + (g[k] + s.weight_decay * theta[k]);
      theta[k] -= lr * v[k];
    }
  }
}

std::size_t diversity(const Tensor& logits) {
  if (logits.rows() == 0) return 0;
  std::vector<bool> seen(logits.cols(), false);
  std::size_t count = 0;
  for (std::size_t c : argmax_rows(logits)) {
    if (!seen[c]) {
      seen[c] = true;
      ++count;
    }
  }
  return count;
}

namespace {

double ramp_weight(double lam, bool ramp, double progress) {
  return ramp ? lam * progress_ramp(progress) : lam;
}

// Target-side forward pass, computed on first use.
struct TargetBranch {
  const BundleVars& vars;
  Var xt;
  std::optional<EfOutput> out;
  std::optional<Var> logits;

  Var features() {
    if (!out) out = ef_forward(vars, xt);
    return out->features;
  }
  Var target_logits() {
    if (!logits) logits = classify(vars, features());
    return *logits;
  }
};

Var adversarial_loss(const BundleVars& vars, Var fs, Var ft, const BatchPair& batch, double coeff) {
  Var d_out = discriminate(vars, grl(concat_rows(fs, ft), coeff));
  return domain_adv_loss(d_out, batch.z);
}

}  // namespace

Objective build_objective(const AlgorithmConfig& cfg, const BundleVars& vars,
                          const BatchPair& batch, const StepContext& ctx, StepAux& aux, Rng& rng) {
  if (vars.ef_w.empty()) throw ContractError("build_objective: empty bundle");
  Tape& t = vars.ef_w.front().tape();
  const std::size_t b = batch.batch_size();
  if (b == 0 || batch.xs.rows() != b || batch.xt.rows() != b || batch.z.size() != 2 * b) {
    throw ContractError("build_objective: malformed batch");
  }

  Var xs = t.constant(batch.xs);
  Var fs = ef_forward(vars, xs).features;
  Var ce = cross_entropy(classify(vars, fs), batch.ys);
  TargetBranch target{vars, t.constant(batch.xt), std::nullopt, std::nullopt};

  if (!batch.yt_labeled.empty()) {
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    for (const auto& [r, y] : batch.yt_labeled) {
      rows.push_back(r);
      labels.push_back(y);
    }
    Var lt = gather_rows(target.target_logits(), rows);
    ce = add(ce, cross_entropy(lt, labels));
  }

  Objective obj;
  obj.ce_term = ce;
  obj.ce = ce.value().item();
  Var total = ce;
  auto add_adapt = [&](Var loss, double weight) {
    obj.adapt_term = loss;
    obj.adapt_weight = weight;
    obj.adapt = loss.value().item();
    total = add(total, scale(loss, weight));
  };

  std::visit(
      overloaded{
          [&](const SourceOnlyConfig&) {},
          [&](const CoralConfig& c) {
            if (b < 2) throw ContractError("coral: batch size must be >= 2");
            Var loss = coral_loss(fs, target.features());
            add_adapt(loss, ramp_weight(c.lam, c.ramp, ctx.progress));
          },
          [&](const DanConfig& c) {
            Var ft = target.features();
            if (!aux.bandwidths) aux.bandwidths = resolve_bandwidths(c.kernel, fs.value(), ft.value());
            Var loss = mk_mmd2(fs, ft, *aux.bandwidths);
            add_adapt(loss, ramp_weight(c.lam, c.ramp, ctx.progress));
          },
          [&](const DannConfig& c) {
            const double coeff = c.grl.at(ctx.progress);
            Var loss = adversarial_loss(vars, fs, target.features(), batch, coeff);
            add_adapt(loss, c.lam);
            obj.adapt_reversed = true;
            obj.grl_coeff = coeff;
          },
          [&](const DsanConfig& c) {
            Var ft = target.features();
            const std::size_t classes = vars.h_w.back().cols();
            if (!aux.bandwidths) aux.bandwidths = resolve_bandwidths(c.kernel, fs.value(), ft.value());
            if (!aux.target_weights) {
              aux.target_weights = lmmd_weights(softmax_rows(target.target_logits().value()));
            }
            Var loss = lmmd2(fs, ft, lmmd_weights(batch.ys, classes), *aux.target_weights,
                             *aux.bandwidths);
            add_adapt(loss, ramp_weight(c.lam, c.ramp, ctx.progress));
          },
          [&](const BnmConfig& c) {
            Var loss = bnm_loss(softmax_rows(target.target_logits()));
            add_adapt(loss, ramp_weight(c.lam, c.ramp, ctx.progress));
          },
          [&](const SsrtConfig& c) {
            Var ft = target.features();
            const double coeff = c.grl.at(ctx.progress);
            Var adv = adversarial_loss(vars, fs, ft, batch, coeff);

            if (!aux.lambda) {
              std::uniform_real_distribution<double> u(0.0, c.lambda_max);
              aux.lambda = c.lambda_max > 0.0 ? u(rng) : 0.0;
            }
            if (!aux.partner) {
              std::vector<std::size_t> perm(b);
              std::iota(perm.begin(), perm.end(), 0);
              std::shuffle(perm.begin(), perm.end(), rng);
              aux.partner = std::move(perm);
            }
            Perturbation perturb{c.perturb_layer, *aux.lambda, *aux.partner};
            if (aux.perturb_difference) perturb.fixed_difference = &*aux.perturb_difference;
            EfOutput perturbed = ef_forward(vars, target.xt, &perturb);
            if (!aux.perturb_difference) aux.perturb_difference = std::move(perturbed.difference);
            Var ft_tilde = perturbed.features;
            Var p = softmax_rows(target.target_logits());
            Var p_tilde = softmax_rows(classify(vars, ft_tilde));
            if (!aux.forward_rows) aux.forward_rows = confidence_filter(p.value(), c.eps);
            if (!aux.backward_rows) aux.backward_rows = confidence_filter(p_tilde.value(), c.eps);
            Var sr = sr_loss(p, p_tilde, c.omega, *aux.forward_rows, *aux.backward_rows);
            add_adapt(adv, ctx.r * c.alpha);
            obj.adapt_reversed = true;
            obj.grl_coeff = coeff;
            obj.sr_term = sr;
            obj.sr_weight = ctx.r * c.beta;
            obj.sr = sr.value().item();
            total = add(total, scale(sr, obj.sr_weight));
          },
      },
      cfg.method);

  obj.total = total;
  obj.target_logits = target.target_logits().value();
  return obj;
}

LossBreakdown train_step(const AlgorithmConfig& cfg, TrainerState& state, const BatchPair& batch,
                         const StepContext& ctx) {
  Tape tape;
  const BundleVars vars = attach(state.bundle, tape);
  StepAux aux;
  Rng rng = state.rng;
  // A diverged model can also surface as a NumericError inside a loss
  // (e.g. the SVD refusing inf); either way nothing has been applied yet.
  Objective obj;
  try {
    obj = build_objective(cfg, vars, batch, ctx, aux, rng);
  } catch (const NumericError& e) {
    throw TrainingError("step " + std::to_string(state.step) + ": " + e.what());
  }
  const double total = obj.total.value().item();
  if (!std::isfinite(total)) {
    throw TrainingError("non-finite loss at step " + std::to_string(state.step));
  }
  tape.backward(obj.total);
  std::vector<Tensor> grads;
  for (Var v : vars.all()) grads.push_back(tape.grad(v));
  sgd_step(state, grads, ctx.lr);
  state.rng = rng;
  ++state.step;

  LossBreakdown out;
  out.step = state.step;
  out.epoch = state.epoch;
  out.lr = ctx.lr;
  out.total = total;
  out.ce = obj.ce;
  out.adapt = obj.adapt;
  out.sr = obj.sr;
  out.r = ctx.r;
  out.diversity = diversity(obj.target_logits);
  return out;
}

}  // namespace uda
