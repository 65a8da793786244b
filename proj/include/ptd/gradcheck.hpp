#pragma once

#include <functional>
#include <string>

#include "ptd/autodiff.hpp"

namespace ptd::ad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  double analytic = 0.0;  // at the worst coordinate
  double numeric = 0.0;
  std::string worst;      // "<name>[<flat index>]"
  std::size_t checked = 0;
};

// Relative error used throughout: |analytic - numeric| / max(1, |numeric|).
double relative_error(double analytic, double numeric);

using ScalarFn = std::function<Var(Tape&, const Var&)>;

// Compares the tape gradient of f at `point` with central differences.
GradCheckResult finite_diff_report(const ScalarFn& f, const Tensor& point, double step);
double finite_diff_check(const ScalarFn& f, const Tensor& point, double step);

// Same comparison over every scalar of every parameter in `params`; `loss`
// must build a scalar on the given tape using tape.param(...).
using LossFn = std::function<Var(Tape&)>;
GradCheckResult check_parameter_gradients(ParameterStore& params, const LossFn& loss, double step);

}  // namespace ptd::ad
