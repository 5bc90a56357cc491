#include "uda/models.hpp"

#include <cmath>
#include <random>
#include <tuple>

#include "uda/error.hpp"

namespace uda {

void LayerSpec::validate(const std::string& name) const {
  if (widths.size() < 2) throw ConfigError(name + ": need at least one layer (two widths)");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError(name + ": layer widths must be >= 1");
  }
}

std::vector<Tensor*> ModelBundle::params() {
  std::vector<Tensor*> out;
  for (Mlp* m : {&ef, &h, &d}) {
    for (std::size_t l = 0; l < m->weights.size(); ++l) {
      out.push_back(&m->weights[l]);
      out.push_back(&m->biases[l]);
    }
  }
  return out;
}

std::vector<const Tensor*> ModelBundle::params() const {
  std::vector<const Tensor*> out;
  for (const Mlp* m : {&ef, &h, &d}) {
    for (std::size_t l = 0; l < m->weights.size(); ++l) {
      out.push_back(&m->weights[l]);
      out.push_back(&m->biases[l]);
    }
  }
  return out;
}

std::vector<std::string> ModelBundle::param_names() const {
  std::vector<std::string> out;
  const std::pair<const char*, const Mlp*> nets[] = {{"ef", &ef}, {"h", &h}, {"d", &d}};
  for (const auto& [name, m] : nets) {
    for (std::size_t l = 0; l < m->weights.size(); ++l) {
      out.push_back(std::string(name) + ".w" + std::to_string(l));
      out.push_back(std::string(name) + ".b" + std::to_string(l));
    }
  }
  return out;
}

Architecture make_architecture(std::size_t input_dim, std::size_t classes,
                               std::vector<std::size_t> ef_hidden, std::size_t feature_dim,
                               std::vector<std::size_t> d_hidden) {
  Architecture a;
  a.ef.widths.push_back(input_dim);
  a.ef.widths.insert(a.ef.widths.end(), ef_hidden.begin(), ef_hidden.end());
  a.ef.widths.push_back(feature_dim);
  a.h.widths = {feature_dim, classes};
  a.d.widths.push_back(feature_dim);
  a.d.widths.insert(a.d.widths.end(), d_hidden.begin(), d_hidden.end());
  a.d.widths.push_back(1);
  return a;
}

namespace {

Mlp init_mlp(const LayerSpec& spec, std::mt19937_64& rng) {
  Mlp m;
  m.spec = spec;
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const std::size_t fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w(fan_in, fan_out);
    for (double& v : w.data()) v = u(rng);
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(1, fan_out);
  }
  return m;
}

}  // namespace

ModelBundle init_bundle(const LayerSpec& ef, const LayerSpec& h, const LayerSpec& d,
                        std::uint64_t seed) {
  ef.validate("e_f");
  h.validate("h");
  d.validate("D");
  if (h.input() != ef.output() || d.input() != ef.output()) {
    throw ConfigError("init_bundle: h and D input widths must equal feature width " +
                      std::to_string(ef.output()));
  }
  if (d.output() != 1) throw ConfigError("init_bundle: D must have a single output");
  std::mt19937_64 rng(seed);
  ModelBundle b;
  b.ef = init_mlp(ef, rng);
  b.h = init_mlp(h, rng);
  b.d = init_mlp(d, rng);
  return b;
}

std::vector<Var> BundleVars::all() const {
  std::vector<Var> out;
  const std::pair<const std::vector<Var>*, const std::vector<Var>*> nets[] = {
      {&ef_w, &ef_b}, {&h_w, &h_b}, {&d_w, &d_b}};
  for (const auto& [w, b] : nets) {
    for (std::size_t l = 0; l < w->size(); ++l) {
      out.push_back((*w)[l]);
      out.push_back((*b)[l]);
    }
  }
  return out;
}

BundleVars attach(const ModelBundle& m, Tape& tape, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  BundleVars v;
  const std::tuple<const Mlp*, std::vector<Var>*, std::vector<Var>*> nets[] = {
      {&m.ef, &v.ef_w, &v.ef_b}, {&m.h, &v.h_w, &v.h_b}, {&m.d, &v.d_w, &v.d_b}};
  for (const auto& [mlp, w, b] : nets) {
    for (std::size_t l = 0; l < mlp->weights.size(); ++l) {
      w->push_back(put(mlp->weights[l]));
      b->push_back(put(mlp->biases[l]));
    }
  }
  return v;
}

BundleVars bind_vars(const ModelBundle& m, std::span<const Var> params) {
  if (params.size() != m.params().size()) {
    throw ShapeError("bind_vars: " + std::to_string(params.size()) + " vars for " +
                     std::to_string(m.params().size()) + " parameters");
  }
  BundleVars v;
  std::size_t i = 0;
  const std::tuple<const Mlp*, std::vector<Var>*, std::vector<Var>*> nets[] = {
      {&m.ef, &v.ef_w, &v.ef_b}, {&m.h, &v.h_w, &v.h_b}, {&m.d, &v.d_w, &v.d_b}};
  for (const auto& [mlp, w, b] : nets) {
    for (std::size_t l = 0; l < mlp->weights.size(); ++l) {
      w->push_back(params[i++]);
      b->push_back(params[i++]);
    }
  }
  return v;
}

namespace {

Var affine(Var x, Var w, Var b) {
  if (x.cols() != w.rows()) {
    throw ShapeError("layer input " + x.shape().str() + " does not fit weight " + w.shape().str());
  }
  Tape& t = x.tape();
  Var ones = t.constant(Tensor::ones(x.rows(), 1));
  return add(matmul(x, w), matmul(ones, b));
}

Var run_mlp(const std::vector<Var>& ws, const std::vector<Var>& bs, Var x) {
  for (std::size_t l = 0; l < ws.size(); ++l) {
    x = affine(x, ws[l], bs[l]);
    if (l + 1 < ws.size()) x = relu(x);
  }
  return x;
}

}  // namespace

EfOutput ef_forward(const BundleVars& m, Var x, const Perturbation* perturb) {
  EfOutput out;
  const std::size_t n = m.ef_w.size();
  if (perturb && perturb->layer >= n) {
    throw ConfigError("perturbation layer " + std::to_string(perturb->layer) + " outside e_f (" +
                      std::to_string(n) + " layers)");
  }
  for (std::size_t l = 0; l < n; ++l) {
    Var b = affine(x, m.ef_w[l], m.ef_b[l]);
    if (perturb && perturb->layer == l && perturb->fixed_difference) {
      if (perturb->fixed_difference->shape() != b.shape()) {
        throw ShapeError("fixed perturbation " + perturb->fixed_difference->shape().str() + " vs " +
                         b.shape().str());
      }
      out.difference = *perturb->fixed_difference;
      b = add(b, scale(b.tape().constant(out.difference), perturb->lambda));
    } else if (perturb && perturb->layer == l) {
      if (perturb->partner.size() != b.rows()) {
        throw ShapeError("perturbation partner list has " + std::to_string(perturb->partner.size()) +
                         " entries for " + std::to_string(b.rows()) + " rows");
      }
      Var offset = stop_gradient(sub(gather_rows(b, perturb->partner), b));
      out.difference = offset.value();
      b = add(b, scale(offset, perturb->lambda));
    }
    out.pre_activations.push_back(b);
    x = l + 1 < n ? relu(b) : b;
  }
  out.features = x;
  return out;
}

Var classify(const BundleVars& m, Var feats) { return run_mlp(m.h_w, m.h_b, feats); }

Var discriminate(const BundleVars& m, Var feats) {
  return clamp(sigmoid(run_mlp(m.d_w, m.d_b, feats)), kDiscClamp, 1.0 - kDiscClamp);
}

Var grl(Var x, double coeff) {
  return x.tape().record(x.value(), {x.id()},
                         [coeff](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                           *pg[0] += g * (-coeff);
                         });
}

double progress_ramp(double progress, double gamma) {
  return 2.0 / (1.0 + std::exp(-gamma * progress)) - 1.0;
}

double GrlCoefficient::at(double progress) const {
  return schedule == Schedule::kConstant ? value : value * progress_ramp(progress, gamma);
}

Tensor extract_features(const ModelBundle& m, const Tensor& x) {
  Tape t;
  const BundleVars v = attach(m, t, false);
  return ef_forward(v, t.constant(x)).features.value();
}

Tensor predict_logits(const ModelBundle& m, const Tensor& x) {
  Tape t;
  const BundleVars v = attach(m, t, false);
  return classify(v, ef_forward(v, t.constant(x)).features).value();
}

}  // namespace uda
