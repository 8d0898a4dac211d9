#pragma once

#include <span>
#include <string>
#include <string_view>

#include "m3h/autodiff.hpp"
#include "m3h/matrix.hpp"

namespace m3h {

enum class ProblemClass { binary, multiclass, regression, cluster };

std::string_view to_string(ProblemClass c);
// Throws FormatError on an unknown name.
ProblemClass parse_problem_class(std::string_view name);

// Binary probabilities are clamped into [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-7;

// Batch-averaged losses on plain values.
//   binary:     prediction n x 1 probabilities, target n x 1 in {0,1}
//   multiclass: prediction n x K log-probabilities, target n x 1 class indices
//   regression: prediction n x 1, target n x 1 (mean absolute error)
//   cluster:    prediction = reconstruction, target = encoder input (mean squared error)
double task_loss(ProblemClass cls, const Matrix& prediction, const Matrix& target);

namespace ad {

// Each takes constant targets and returns a 1x1 batch mean.
Var binary_cross_entropy(Var probabilities, const Matrix& targets);
Var negative_log_likelihood(Var log_probabilities, std::span<const std::size_t> targets);
Var mean_absolute_error(Var prediction, const Matrix& targets);
Var mean_squared_error(Var prediction, const Matrix& targets);

}  // namespace ad
}  // namespace m3h
