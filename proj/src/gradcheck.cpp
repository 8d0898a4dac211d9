#include "m3h/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "m3h/error.hpp"

namespace m3h {
namespace {

double evaluate(const ParameterStore& params, const LossBuilder& loss) {
  Tape tape(&params);
  const Var out = loss(tape);
  const Matrix& v = out.value();
  if (v.rows() != 1 || v.cols() != 1) throw DimensionError("gradient check needs a 1x1 loss");
  if (!std::isfinite(v(0, 0))) throw NumericError("non-finite loss during gradient check");
  return v(0, 0);
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradientSet analytic_gradients(const ParameterStore& params, const LossBuilder& loss) {
  Tape tape(&params);
  const Var out = loss(tape);
  return tape.backward(out);
}

GradCheckReport compare_gradients(ParameterStore& params, const LossBuilder& loss,
                                  const GradientSet& analytic, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw DomainError("gradient check eps must lie in (0, 1e-2]");
  if (analytic.size() != params.size()) {
    throw DimensionError("gradient set does not match the parameter store");
  }
  evaluate(params, loss);

  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    ParameterCheck check{params.name(p), 0.0, 0};
    auto values = params.value(p).values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + eps;
      const double up = evaluate(params, loss);
      values[k] = saved - eps;
      const double down = evaluate(params, loss);
      values[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[p].values()[k], numeric);
      if (err > check.max_relative_error) {
        check.max_relative_error = err;
        check.worst_entry = k;
      }
    }
    if (check.max_relative_error > report.max_relative_error || report.worst_parameter.empty()) {
      if (check.max_relative_error >= report.max_relative_error) {
        report.max_relative_error = check.max_relative_error;
        report.worst_parameter = check.name;
      }
    }
    report.parameters.push_back(std::move(check));
  }
  return report;
}

GradCheckReport gradient_check(ParameterStore& params, const LossBuilder& loss, double eps) {
  if (!(eps > 0.0 && eps <= 1e-2)) throw DomainError("gradient check eps must lie in (0, 1e-2]");
  const GradientSet analytic = analytic_gradients(params, loss);
  return compare_gradients(params, loss, analytic, eps);
}

}  // namespace m3h
