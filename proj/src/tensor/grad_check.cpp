#include "factoreeg/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "factoreeg/error.hpp"

namespace factoreeg {

namespace {

double evaluate(const ScalarFn& f, std::span<const Tensor> inputs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, false));
  Var out = f(tape, vars);
  return out.value().data[0];
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, std::span<const Tensor> inputs, double tol,
                           double step) {
  for (const Tensor& t : inputs) {
    if (!t.all_finite()) throw NumericError("grad_check: non-finite input");
  }

  Tape tape;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, true));
  Var out = f(tape, vars);
  if (out.numel() != 1) {
    throw ShapeError("grad_check: function must return a scalar, got " + shape_str(out.shape()));
  }
  if (tape.stochastic()) {
    throw Error("grad_check: function is non-deterministic (training-mode dropout)");
  }
  tape.backward(out);

  GradCheckResult result;
  std::vector<Tensor> probe(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    for (std::size_t i = 0; i < probe[k].numel(); ++i) {
      const double saved = probe[k].data[i];
      probe[k].data[i] = saved + step;
      const double up = evaluate(f, probe);
      probe[k].data[i] = saved - step;
      const double down = evaluate(f, probe);
      probe[k].data[i] = saved;

      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      result.max_rel_error = std::max(result.max_rel_error, err);
    }
  }
  result.passed = result.max_rel_error <= tol;
  return result;
}

}  // namespace factoreeg
