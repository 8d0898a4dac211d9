#include "m3h/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "m3h/error.hpp"

namespace m3h {

std::string_view to_string(ProblemClass c) {
  switch (c) {
    case ProblemClass::binary: return "binary";
    case ProblemClass::multiclass: return "multiclass";
    case ProblemClass::regression: return "regression";
    case ProblemClass::cluster: return "cluster";
  }
  return "unknown";
}

ProblemClass parse_problem_class(std::string_view name) {
  if (name == "binary") return ProblemClass::binary;
  if (name == "multiclass") return ProblemClass::multiclass;
  if (name == "regression") return ProblemClass::regression;
  if (name == "cluster") return ProblemClass::cluster;
  throw FormatError("unknown problem class '" + std::string(name) + "'");
}

namespace {

double clamp_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("binary prediction " + std::to_string(p) + " outside (0,1)");
  }
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

void require_binary_target(double y) {
  if (y != 0.0 && y != 1.0) throw DomainError("binary target must be 0 or 1");
}

std::size_t class_index(double y, std::size_t num_classes) {
  if (!(y >= 0.0) || y != std::floor(y) || y >= static_cast<double>(num_classes)) {
    throw IndexError("class index " + std::to_string(y) + " out of range [0, " +
                     std::to_string(num_classes) + ")");
  }
  return static_cast<std::size_t>(y);
}

void require_column_pair(const Matrix& pred, const Matrix& target, const char* what) {
  if (pred.cols() != 1 || target.cols() != 1 || pred.rows() != target.rows()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + pred.shape_string() + " vs " +
                         target.shape_string());
  }
  if (pred.rows() == 0) throw DomainError(std::string(what) + " on an empty batch");
}

}  // namespace

double task_loss(ProblemClass cls, const Matrix& prediction, const Matrix& target) {
  switch (cls) {
    case ProblemClass::binary: {
      require_column_pair(prediction, target, "binary loss");
      double total = 0.0;
      for (std::size_t i = 0; i < prediction.rows(); ++i) {
        const double p = clamp_probability(prediction(i, 0));
        const double y = target(i, 0);
        require_binary_target(y);
        total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      }
      return total / static_cast<double>(prediction.rows());
    }
    case ProblemClass::multiclass: {
      if (target.cols() != 1 || target.rows() != prediction.rows()) {
        throw DimensionError("multiclass loss: shape mismatch " + prediction.shape_string() +
                             " vs " + target.shape_string());
      }
      if (prediction.rows() == 0) throw DomainError("multiclass loss on an empty batch");
      double total = 0.0;
      for (std::size_t i = 0; i < prediction.rows(); ++i)
        total -= prediction(i, class_index(target(i, 0), prediction.cols()));
      return total / static_cast<double>(prediction.rows());
    }
    case ProblemClass::regression: {
      require_column_pair(prediction, target, "regression loss");
      double total = 0.0;
      for (std::size_t i = 0; i < prediction.rows(); ++i)
        total += std::abs(prediction(i, 0) - target(i, 0));
      return total / static_cast<double>(prediction.rows());
    }
    case ProblemClass::cluster: {
      require_same_shape(prediction, target, "reconstruction loss");
      if (prediction.size() == 0) throw DomainError("reconstruction loss on an empty batch");
      double total = 0.0;
      auto a = prediction.values();
      auto b = target.values();
      for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
      return total / static_cast<double>(a.size());
    }
  }
  throw ContractError("unhandled problem class");
}

namespace ad {

Var binary_cross_entropy(Var probabilities, const Matrix& targets) {
  const Matrix& p = probabilities.value();
  const double value = task_loss(ProblemClass::binary, p, targets);
  return probabilities.tape().record(
      Matrix(1, 1, value), {probabilities},
      [targets](const Matrix& g, BackwardContext& ctx) {
        const Matrix& pv = ctx.input(0);
        Matrix& d = ctx.grad(0);
        const double n = static_cast<double>(pv.rows());
        for (std::size_t i = 0; i < pv.rows(); ++i) {
          const double raw = pv(i, 0);
          if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;  // clamped: flat
          const double y = targets(i, 0);
          d(i, 0) += g(0, 0) * (-(y / raw) + (1.0 - y) / (1.0 - raw)) / n;
        }
      });
}

Var negative_log_likelihood(Var log_probabilities, std::span<const std::size_t> targets) {
  const Matrix& lp = log_probabilities.value();
  if (targets.size() != lp.rows()) {
    throw DimensionError("negative_log_likelihood: " + std::to_string(targets.size()) +
                         " targets for " + lp.shape_string());
  }
  Matrix t(targets.size(), 1);
  for (std::size_t i = 0; i < targets.size(); ++i) t(i, 0) = static_cast<double>(targets[i]);
  const double value = task_loss(ProblemClass::multiclass, lp, t);
  std::vector<std::size_t> idx(targets.begin(), targets.end());
  return log_probabilities.tape().record(
      Matrix(1, 1, value), {log_probabilities},
      [idx = std::move(idx)](const Matrix& g, BackwardContext& ctx) {
        Matrix& d = ctx.grad(0);
        const double n = static_cast<double>(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) d(i, idx[i]) -= g(0, 0) / n;
      });
}

Var mean_absolute_error(Var prediction, const Matrix& targets) {
  const double value = task_loss(ProblemClass::regression, prediction.value(), targets);
  for (std::size_t i = 0; i < targets.rows(); ++i)
    prediction.tape().note_kink(std::abs(prediction.value()(i, 0) - targets(i, 0)));
  return prediction.tape().record(
      Matrix(1, 1, value), {prediction}, [targets](const Matrix& g, BackwardContext& ctx) {
        const Matrix& pv = ctx.input(0);
        Matrix& d = ctx.grad(0);
        const double n = static_cast<double>(pv.rows());
        for (std::size_t i = 0; i < pv.rows(); ++i) {
          const double diff = pv(i, 0) - targets(i, 0);
          if (diff != 0.0) d(i, 0) += g(0, 0) * (diff > 0.0 ? 1.0 : -1.0) / n;
        }
      });
}

Var mean_squared_error(Var prediction, const Matrix& targets) {
  const double value = task_loss(ProblemClass::cluster, prediction.value(), targets);
  return prediction.tape().record(
      Matrix(1, 1, value), {prediction}, [targets](const Matrix& g, BackwardContext& ctx) {
        auto pv = ctx.input(0).values();
        auto tv = targets.values();
        auto d = ctx.grad(0).values();
        const double n = static_cast<double>(pv.size());
        for (std::size_t i = 0; i < pv.size(); ++i) d[i] += g(0, 0) * 2.0 * (pv[i] - tv[i]) / n;
      });
}

}  // namespace ad
}  // namespace m3h
