#pragma once

#include <functional>
#include <string>
#include <vector>

#include "psr/autograd.hpp"

namespace psr {

struct GradCheckReport {
  std::string op;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = false;
  std::vector<Tensor> analytic;
  std::vector<Tensor> numeric;
};

using ScalarFn = std::function<Var(const std::vector<Var>&)>;

/// Compares the reverse-mode gradient of a scalar-valued `fn` with central
/// differences (step `step`). Per-entry relative error uses
/// max(|analytic|, |numeric|, 1e-6) as the denominator.
/// Throws GradCheckError if any analytic gradient entry is non-finite.
GradCheckReport grad_check(const std::string& op, const ScalarFn& fn,
                           const std::vector<Tensor>& inputs, double tolerance,
                           double step = 1e-4);

}  // namespace psr
