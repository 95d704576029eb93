#include "psr/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "psr/errors.hpp"

namespace psr {

namespace {

double evaluate(const ScalarFn& fn, const std::vector<Tensor>& inputs) {
  NoGradGuard guard;
  std::vector<Var> vars;
  vars.reserve(inputs.size());
  for (const Tensor& t : inputs) vars.emplace_back(t, false);
  Var out = fn(vars);
  if (out.size() != 1) throw DimensionError("grad_check: function must return a scalar");
  return out.value()[0];
}

}  // namespace

GradCheckReport grad_check(const std::string& op, const ScalarFn& fn,
                           const std::vector<Tensor>& inputs, double tolerance, double step) {
  GradCheckReport report;
  report.op = op;

  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.emplace_back(t, true);
  Var out = fn(vars);
  if (out.size() != 1) throw DimensionError("grad_check: " + op + " must return a scalar");
  backward(out);
  for (const Var& v : vars) {
    if (!v.grad().all_finite()) throw GradCheckError("non-finite gradient in op " + op);
    report.analytic.push_back(v.grad());
  }

  std::vector<Tensor> probe = inputs;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    Tensor numeric(probe[t].shape());
    for (std::size_t i = 0; i < probe[t].size(); ++i) {
      const double orig = probe[t][i];
      probe[t][i] = orig + step;
      const double up = evaluate(fn, probe);
      probe[t][i] = orig - step;
      const double down = evaluate(fn, probe);
      probe[t][i] = orig;
      numeric[i] = (up - down) / (2.0 * step);

      const double a = report.analytic[t][i];
      const double diff = std::abs(a - numeric[i]);
      const double denom = std::max({std::abs(a), std::abs(numeric[i]), 1e-6});
      report.max_abs_error = std::max(report.max_abs_error, diff);
      report.max_rel_error = std::max(report.max_rel_error, diff / denom);
    }
    report.numeric.push_back(std::move(numeric));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace psr
