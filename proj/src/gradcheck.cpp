#include "ptd/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace ptd::ad {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

namespace {

double evaluate(const ScalarFn& f, const Tensor& point) {
  Tape tape;
  Var x = tape.variable(point);
  const double v = f(tape, x).value().item();
  if (!std::isfinite(v)) throw std::domain_error("finite-difference evaluation is not finite");
  return v;
}

void track(GradCheckResult& r, double analytic, double numeric, const std::string& where) {
  const double e = relative_error(analytic, numeric);
  ++r.checked;
  if (e > r.max_rel_error || r.worst.empty()) {
    r.max_rel_error = std::max(e, r.max_rel_error);
    r.analytic = analytic;
    r.numeric = numeric;
    r.worst = where;
  }
}

}  // namespace

GradCheckResult finite_diff_report(const ScalarFn& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Tape tape;
  Var x = tape.variable(point);
  Var y = f(tape, x);
  tape.backward(y);
  const Tensor analytic = tape.grad(x);

  GradCheckResult r;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = evaluate(f, probe);
    probe[i] = point[i] - step;
    const double down = evaluate(f, probe);
    probe[i] = point[i];
    track(r, analytic[i], (up - down) / (2.0 * step), "x[" + std::to_string(i) + "]");
  }
  return r;
}

double finite_diff_check(const ScalarFn& f, const Tensor& point, double step) {
  return finite_diff_report(f, point, step).max_rel_error;
}

GradCheckResult check_parameter_gradients(ParameterStore& params, const LossFn& loss, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Gradients grads(params);
  {
    Tape tape(&params);
    Var l = loss(tape);
    tape.backward(l);
    tape.accumulate_parameter_grads(grads);
  }
  auto eval = [&] {
    Tape tape(&params);
    const double v = loss(tape).value().item();
    if (!std::isfinite(v)) throw std::domain_error("finite-difference evaluation is not finite");
    return v;
  };

  GradCheckResult r;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& value = params[ParamId{p}].value;
    const auto& g = grads[ParamId{p}];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double orig = value[i];
      value[i] = orig + step;
      const double up = eval();
      value[i] = orig - step;
      const double down = eval();
      value[i] = orig;
      track(r, g[i], (up - down) / (2.0 * step), params[ParamId{p}].name + "[" + std::to_string(i) + "]");
    }
  }
  return r;
}

}  // namespace ptd::ad
