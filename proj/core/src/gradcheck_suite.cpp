#include <algorithm>
#include <cmath>
#include <random>

#include "uda/divergences.hpp"
#include "uda/error.hpp"
#include "uda/gradcheck.hpp"
#include "uda/models.hpp"

namespace uda {

namespace {

double objective_value(const AlgorithmConfig& cfg, const ModelBundle& layout,
                       const std::vector<Tensor>& params, const BatchPair& batch,
                       const StepContext& ctx, const StepAux& frozen, bool upstream) {
  Tape t;
  std::vector<Var> vars;
  for (const Tensor& p : params) vars.push_back(t.constant(p));
  StepAux aux = frozen;
  Rng unused(0);
  const Objective obj = build_objective(cfg, bind_vars(layout, vars), batch, ctx, aux, unused);
  if (!upstream || !obj.adapt_reversed) return obj.total.value().item();
  double v = obj.ce - obj.grl_coeff * obj.adapt_weight * obj.adapt;
  if (obj.sr_term.valid()) v += obj.sr_weight * obj.sr;
  return v;
}

}  // namespace

GradCheckResult check_objective_gradients(const AlgorithmConfig& cfg, const ModelBundle& bundle,
                                          const BatchPair& batch, const StepContext& ctx,
                                          std::uint64_t seed, double step) {
  Tape tape;
  const BundleVars vars = attach(bundle, tape);
  StepAux aux;
  Rng rng(seed);
  const Objective obj = build_objective(cfg, vars, batch, ctx, aux, rng);
  tape.backward(obj.total);

  std::vector<Tensor> params;
  for (const Tensor* p : bundle.params()) params.push_back(*p);
  const std::size_t upstream_count = 2 * (bundle.ef.weights.size() + bundle.h.weights.size());
  const auto all = vars.all();

  GradCheckResult res;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = tape.grad(all[i]);
    const bool upstream = i < upstream_count;
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      const double orig = params[i][k];
      params[i][k] = orig + step;
      const double up = objective_value(cfg, bundle, params, batch, ctx, aux, upstream);
      params[i][k] = orig - step;
      const double down = objective_value(cfg, bundle, params, batch, ctx, aux, upstream);
      params[i][k] = orig;
      const double fd = (up - down) / (2.0 * step);
      const double err = std::abs(g[k] - fd) / std::max(1.0, std::abs(g[k]));
      if (!(err <= res.max_rel_error)) {
        res.max_rel_error = std::isnan(err) ? INFINITY : err;
        res.worst_input = i;
        res.worst_entry = k;
      }
      ++res.entries;
    }
  }
  return res;
}

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(pick(rng, 0, classes - 1));
  return y;
}

struct Instance {
  ScalarGraph graph;
  std::vector<Tensor> inputs;
};

using Generator = std::function<Instance(Rng&)>;

std::vector<std::pair<std::string, Generator>> primitive_cases() {
  std::vector<std::pair<std::string, Generator>> cases;
  auto unary = [&](std::string name, std::function<Var(Var)> op, double lo = -1.0,
                   double hi = 1.0) {
    cases.emplace_back(std::move(name), [op, lo, hi](Rng& rng) {
      const std::size_t r = pick(rng, 1, 5), c = pick(rng, 1, 5);
      // A fixed random weighting keeps the cotangent from being all ones.
      Tensor w = random_tensor(r, c, rng);
      return Instance{[op, w](Tape& t, std::span<const Var> in) {
                        return sum(mul(op(in[0]), t.constant(w)));
                      },
                      {random_tensor(r, c, rng, lo, hi)}};
    });
  };
  unary("relu", [](Var a) { return relu(a); });
  unary("exp", [](Var a) { return exp(a); });
  unary("log_clamped", [](Var a) { return log_clamped(a); }, 0.1, 2.0);
  unary("sigmoid", [](Var a) { return sigmoid(a); }, -3.0, 3.0);
  unary("clamp", [](Var a) { return clamp(a, -0.5, 0.5); });
  unary("scale", [](Var a) { return scale(a, -1.7); });
  unary("transpose", [](Var a) { return transpose(transpose(a)); });
  unary("softmax_rows", [](Var a) { return softmax_rows(a); }, -3.0, 3.0);
  unary("log_softmax_rows", [](Var a) { return log_softmax_rows(a); }, -3.0, 3.0);

  cases.emplace_back("matmul", [](Rng& rng) {
    const std::size_t m = pick(rng, 1, 5), k = pick(rng, 1, 5), n = pick(rng, 1, 5);
    Tensor w = random_tensor(m, n, rng);
    return Instance{[w](Tape& t, std::span<const Var> in) {
                      return sum(mul(matmul(in[0], in[1]), t.constant(w)));
                    },
                    {random_tensor(m, k, rng), random_tensor(k, n, rng)}};
  });
  for (const char* name : {"add", "sub", "mul"}) {
    cases.emplace_back(name, [name = std::string(name)](Rng& rng) {
      const std::size_t r = pick(rng, 1, 5), c = pick(rng, 1, 5);
      Tensor w = random_tensor(r, c, rng);
      return Instance{[name, w](Tape& t, std::span<const Var> in) {
                        Var out = name == "add"   ? add(in[0], in[1])
                                  : name == "sub" ? sub(in[0], in[1])
                                                  : mul(in[0], in[1]);
                        return sum(mul(out, t.constant(w)));
                      },
                      {random_tensor(r, c, rng), random_tensor(r, c, rng)}};
    });
  }
  cases.emplace_back("reduce", [](Rng& rng) {
    const std::size_t r = pick(rng, 1, 5), c = pick(rng, 1, 5);
    return Instance{[](Tape&, std::span<const Var> in) {
                      return add(add(sum(in[0]), scale(mean(in[0]), 3.0)),
                                 scale(frobenius_sq(in[0]), 0.5));
                    },
                    {random_tensor(r, c, rng)}};
  });
  cases.emplace_back("sq_dist", [](Rng& rng) {
    const std::size_t n = pick(rng, 1, 5), m = pick(rng, 1, 5), d = pick(rng, 1, 4);
    Tensor w = random_tensor(n, m, rng);
    return Instance{[w](Tape& t, std::span<const Var> in) {
                      return sum(mul(sq_dist(in[0], in[1]), t.constant(w)));
                    },
                    {random_tensor(n, d, rng), random_tensor(m, d, rng)}};
  });
  cases.emplace_back("gather_concat", [](Rng& rng) {
    const std::size_t n = pick(rng, 2, 5), d = pick(rng, 1, 4);
    std::vector<std::size_t> idx(pick(rng, 1, 6));
    for (auto& i : idx) i = pick(rng, 0, 2 * n - 1);
    Tensor w = random_tensor(idx.size(), d, rng);
    return Instance{[idx, w](Tape& t, std::span<const Var> in) {
                      return sum(mul(gather_rows(concat_rows(in[0], in[1]), idx), t.constant(w)));
                    },
                    {random_tensor(n, d, rng), random_tensor(n, d, rng)}};
  });
  cases.emplace_back("grl", [](Rng& rng) {
    const std::size_t r = pick(rng, 1, 4), c = pick(rng, 1, 4);
    // grl with coefficient -1 is the identity on gradients, so it must
    // match finite differences of the value path exactly.
    return Instance{[](Tape&, std::span<const Var> in) {
                      return frobenius_sq(grl(exp(in[0]), -1.0));
                    },
                    {random_tensor(r, c, rng)}};
  });
  return cases;
}

std::vector<std::pair<std::string, Generator>> loss_cases() {
  std::vector<std::pair<std::string, Generator>> cases;
  cases.emplace_back("cross_entropy", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 8), c = pick(rng, 2, 5);
    auto y = random_labels(b, c, rng);
    return Instance{[y](Tape&, std::span<const Var> in) { return cross_entropy(in[0], y); },
                    {random_tensor(b, c, rng, -3.0, 3.0)}};
  });
  cases.emplace_back("domain_adv_loss", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 6);
    std::vector<double> z(2 * b, 0.0);
    std::fill_n(z.begin(), b, 1.0);
    return Instance{[z](Tape&, std::span<const Var> in) {
                      return domain_adv_loss(sigmoid(in[0]), z);
                    },
                    {random_tensor(2 * b, 1, rng, -3.0, 3.0)}};
  });
  cases.emplace_back("covariance", [](Rng& rng) {
    const std::size_t n = pick(rng, 2, 8), d = pick(rng, 1, 4);
    Tensor w = random_tensor(d, d, rng);
    return Instance{[w](Tape& t, std::span<const Var> in) {
                      return sum(mul(covariance(in[0]), t.constant(w)));
                    },
                    {random_tensor(n, d, rng)}};
  });
  cases.emplace_back("coral_loss", [](Rng& rng) {
    const std::size_t ns = pick(rng, 2, 8), nt = pick(rng, 2, 8), d = pick(rng, 1, 5);
    return Instance{[](Tape&, std::span<const Var> in) { return coral_loss(in[0], in[1]); },
                    {random_tensor(ns, d, rng), random_tensor(nt, d, rng, -2.0, 1.5)}};
  });
  cases.emplace_back("mmd2", [](Rng& rng) {
    const std::size_t ns = pick(rng, 1, 8), nt = pick(rng, 1, 8), d = pick(rng, 1, 4);
    const double sigma = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
    return Instance{[sigma](Tape&, std::span<const Var> in) { return mmd2(in[0], in[1], sigma); },
                    {random_tensor(ns, d, rng), random_tensor(nt, d, rng, -0.5, 1.5)}};
  });
  cases.emplace_back("mk_mmd2", [](Rng& rng) {
    const std::size_t ns = pick(rng, 2, 8), nt = pick(rng, 2, 8), d = pick(rng, 1, 4);
    Tensor xs = random_tensor(ns, d, rng), xt = random_tensor(nt, d, rng, -0.5, 1.5);
    const auto sigmas = resolve_bandwidths(KernelSpec::median(), xs, xt);
    return Instance{[sigmas](Tape&, std::span<const Var> in) { return mk_mmd2(in[0], in[1], sigmas); },
                    {xs, xt}};
  });
  cases.emplace_back("lmmd2", [](Rng& rng) {
    const std::size_t ns = pick(rng, 2, 8), nt = pick(rng, 2, 8), d = pick(rng, 1, 4);
    const std::size_t c = pick(rng, 1, 3);
    ClassWeights ws = lmmd_weights(random_labels(ns, c, rng), c);
    ClassWeights wt = lmmd_weights(softmax_rows(random_tensor(nt, c, rng, -2.0, 2.0)));
    const std::vector<double> sigmas{0.7, 1.4};
    return Instance{[ws, wt, sigmas](Tape&, std::span<const Var> in) {
                      return lmmd2(in[0], in[1], ws, wt, sigmas);
                    },
                    {random_tensor(ns, d, rng), random_tensor(nt, d, rng, -0.5, 1.5)}};
  });
  cases.emplace_back("nuclear_norm", [](Rng& rng) {
    const std::size_t r = pick(rng, 1, 6), c = pick(rng, 1, 6);
    return Instance{[](Tape&, std::span<const Var> in) { return nuclear_norm(in[0]); },
                    {random_tensor(r, c, rng)}};
  });
  cases.emplace_back("bnm_loss", [](Rng& rng) {
    const std::size_t b = pick(rng, 2, 8), c = pick(rng, 2, 5);
    return Instance{[](Tape&, std::span<const Var> in) { return bnm_loss(softmax_rows(in[0])); },
                    {random_tensor(b, c, rng, -2.0, 2.0)}};
  });
  cases.emplace_back("kl_div", [](Rng& rng) {
    const std::size_t c = pick(rng, 2, 6);
    return Instance{[](Tape&, std::span<const Var> in) {
                      return kl_div(softmax_rows(in[0]), softmax_rows(in[1]));
                    },
                    {random_tensor(1, c, rng, -2.0, 2.0), random_tensor(1, c, rng, -2.0, 2.0)}};
  });
  cases.emplace_back("sr_loss", [](Rng& rng) {
    const std::size_t b = pick(rng, 2, 8), c = pick(rng, 2, 4);
    Tensor lp = random_tensor(b, c, rng, -3.0, 3.0), lq = random_tensor(b, c, rng, -3.0, 3.0);
    const double omega = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double eps = 0.5;
    const auto fwd = confidence_filter(softmax_rows(lp), eps);
    const auto bwd = confidence_filter(softmax_rows(lq), eps);
    return Instance{[omega, fwd, bwd](Tape&, std::span<const Var> in) {
                      return sr_loss(softmax_rows(in[0]), softmax_rows(in[1]), omega, fwd, bwd);
                    },
                    {lp, lq}};
  });
  cases.emplace_back("entropy_mean", [](Rng& rng) {
    const std::size_t b = pick(rng, 1, 6), c = pick(rng, 2, 5);
    return Instance{[](Tape&, std::span<const Var> in) { return entropy_mean(softmax_rows(in[0])); },
                    {random_tensor(b, c, rng, -2.0, 2.0)}};
  });
  cases.emplace_back("ef_forward", [](Rng& rng) {
    const Architecture a = make_architecture(3, 3, {5}, 4, {3});
    ModelBundle m = init_bundle(a.ef, a.h, a.d, rng());
    for (Tensor* p : m.params()) *p = random_tensor(p->rows(), p->cols(), rng);
    const std::size_t b = pick(rng, 1, 5);
    return Instance{[m](Tape& t, std::span<const Var> in) {
                      const BundleVars v = attach(m, t, false);
                      return sum(ef_forward(v, in[0]).features);
                    },
                    {random_tensor(b, 3, rng)}};
  });
  return cases;
}

std::vector<AlgorithmConfig> objective_configs() {
  SsrtConfig ssrt;
  ssrt.beta = 1.0;
  ssrt.eps = 0.3;  // below 1/C for C = 3: every row passes the filter
  ssrt.lambda_max = 0.5;
  DannConfig dann;
  dann.grl.value = 0.7;
  return {AlgorithmConfig{SourceOnlyConfig{}, ""}, AlgorithmConfig{CoralConfig{}, ""},
          AlgorithmConfig{DanConfig{}, ""},        AlgorithmConfig{dann, ""},
          AlgorithmConfig{DsanConfig{}, ""},       AlgorithmConfig{BnmConfig{}, ""},
          AlgorithmConfig{ssrt, ""}};
}

BatchPair random_batch(Rng& rng, std::size_t b, std::size_t d, std::size_t classes,
                       bool labeled_target) {
  BatchPair batch;
  batch.xs = random_tensor(b, d, rng, -1.5, 1.5);
  batch.xt = random_tensor(b, d, rng, -1.0, 2.0);
  batch.ys = random_labels(b, classes, rng);
  batch.z.assign(2 * b, 0.0);
  std::fill_n(batch.z.begin(), b, 1.0);
  if (labeled_target) batch.yt_labeled.emplace_back(0, static_cast<int>(classes - 1));
  return batch;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& opts) {
  std::vector<GradCheckCase> out;
  std::uint64_t salt = 0;
  auto run_cases = [&](const std::vector<std::pair<std::string, Generator>>& cases) {
    for (const auto& [name, gen] : cases) {
      Rng rng(opts.seed + 7919 * ++salt);
      GradCheckCase c{name, opts.instances, 0.0, true};
      for (std::size_t i = 0; i < opts.instances; ++i) {
        const Instance inst = gen(rng);
        const auto r = check_gradients(inst.graph, inst.inputs, opts.step);
        c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
      }
      c.passed = c.max_rel_error <= opts.tolerance;
      out.push_back(c);
    }
  };
  run_cases(primitive_cases());
  run_cases(loss_cases());

  for (const AlgorithmConfig& cfg : objective_configs()) {
    for (bool labeled : {false, true}) {
      if (labeled && !cfg.is_source_only()) continue;
      Rng rng(opts.seed + 7919 * ++salt);
      GradCheckCase c{"objective/" + cfg.name() + (labeled ? "+labeled_target" : ""),
                      opts.instances, 0.0, true};
      for (std::size_t i = 0; i < opts.instances; ++i) {
        const std::size_t d = pick(rng, 2, 4);
        const Architecture a = make_architecture(d, 3, {6}, 5, {4});
        ModelBundle m = init_bundle(a.ef, a.h, a.d, rng());
        for (std::size_t l = 0; l < m.ef.biases.size(); ++l) {
          m.ef.biases[l] = random_tensor(1, m.ef.biases[l].cols(), rng, -0.2, 0.2);
        }
        const BatchPair batch = random_batch(rng, pick(rng, 3, 8), d, 3, labeled);
        StepContext ctx;
        ctx.progress = 0.5;
        const auto r = check_objective_gradients(cfg, m, batch, ctx, rng(), opts.step);
        c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
      }
      c.passed = c.max_rel_error <= opts.tolerance;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace uda
