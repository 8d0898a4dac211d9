#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "m3h/losses.hpp"
#include "m3h/matrix.hpp"

namespace m3h {

enum class MetricKind { auroc, averaged_auroc, r_squared, silhouette };

std::string_view to_string(MetricKind kind);
MetricKind metric_for(ProblemClass problem);

// Probability that a random positive outranks a random negative, ties counted
// one half (midrank formulation). Throws DomainError without both classes.
double auroc(std::span<const double> scores, std::span<const double> labels);

// Mean one-vs-rest AUROC over the classes present in `labels`.
double averaged_auroc(const Matrix& log_probs, std::span<const std::size_t> labels);

// 1 - SS_res / SS_tot. Throws DomainError when the target has no variance.
double r_squared(std::span<const double> prediction, std::span<const double> target);

// Mean silhouette with Euclidean distances; points in singleton clusters count 0.
double silhouette(const Matrix& points, std::span<const std::size_t> assignments);

// Maps every metric onto [0, 1] for averaging across tasks: AUROC unchanged,
// R^2 clamped to [0, 1], silhouette (s + 1) / 2.
double normalize_score(MetricKind kind, double raw);

struct ScoreReport {
  std::string task;
  MetricKind metric = MetricKind::auroc;
  double raw = 0.0;
  double normalized = 0.0;
  std::size_t n_evaluated = 0;
  // False when the evaluation set could not support the metric (for example
  // a validation fold holding only one class).
  bool valid = true;
};

}  // namespace m3h
