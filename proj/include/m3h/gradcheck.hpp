#pragma once

#include <functional>
#include <string>
#include <vector>

#include "m3h/autodiff.hpp"

namespace m3h {

// Builds the scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Var(Tape&)>;

struct ParameterCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_entry = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::vector<ParameterCheck> parameters;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

GradientSet analytic_gradients(const ParameterStore& params, const LossBuilder& loss);

// Compares `analytic` entry by entry against central differences
// (L(theta + eps) - L(theta - eps)) / (2 eps). `params` is perturbed in place
// and restored before returning.
GradCheckReport compare_gradients(ParameterStore& params, const LossBuilder& loss,
                                  const GradientSet& analytic, double eps);

// analytic_gradients followed by compare_gradients. eps must lie in (0, 1e-2].
GradCheckReport gradient_check(ParameterStore& params, const LossBuilder& loss, double eps);

}  // namespace m3h
