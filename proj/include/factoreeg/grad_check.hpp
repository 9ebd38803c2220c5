#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "factoreeg/tape.hpp"

namespace factoreeg {

/// A scalar-valued function of tape variables, rebuilt on a fresh tape per evaluation.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Compares reverse-mode gradients of `f` against central differences.
///
/// Error per element is |analytic - numeric| / max(1e-8, |analytic| + |numeric|);
/// the maximum over all input elements is reported. Throws ShapeError when f is
/// not scalar and Error when f draws random numbers (training-mode dropout).
GradCheckResult grad_check(const ScalarFn& f, std::span<const Tensor> inputs, double tol,
                           double step = 1e-5);

struct OpCheck {
  std::string op;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Checks every differentiable op and loss at `n_seeds` random inputs each.
/// Each op is reduced to a scalar through a fixed random projection.
std::vector<OpCheck> grad_check_suite(std::size_t n_seeds = 5, double tol = 1e-4);

}  // namespace factoreeg
