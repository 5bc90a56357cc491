#include "uda/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "uda/error.hpp"

namespace uda {

namespace {

double evaluate(const ScalarGraph& f, const std::vector<Tensor>& inputs) {
  Tape t;
  std::vector<Var> vars;
  for (const Tensor& x : inputs) vars.push_back(t.constant(x));
  return f(t, vars).value().item();
}

}  // namespace

GradCheckResult check_gradients(const ScalarGraph& f, std::span<const Tensor> inputs, double step) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& x : inputs) vars.push_back(tape.leaf(x));
  Var loss = f(tape, vars);
  tape.backward(loss);

  GradCheckResult res;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const Tensor& g = tape.grad(vars[i]);
    for (std::size_t k = 0; k < probe[i].size(); ++k) {
      const double orig = probe[i][k];
      probe[i][k] = orig + step;
      const double up = evaluate(f, probe);
      probe[i][k] = orig - step;
      const double down = evaluate(f, probe);
      probe[i][k] = orig;
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

}  // namespace uda
