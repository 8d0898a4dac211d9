#include "m3h/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "m3h/error.hpp"

namespace m3h {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::auroc: return "auroc";
    case MetricKind::averaged_auroc: return "avg_auroc";
    case MetricKind::r_squared: return "r2";
    case MetricKind::silhouette: return "silhouette";
  }
  return "unknown";
}

MetricKind metric_for(ProblemClass problem) {
  switch (problem) {
    case ProblemClass::binary: return MetricKind::auroc;
    case ProblemClass::multiclass: return MetricKind::averaged_auroc;
    case ProblemClass::regression: return MetricKind::r_squared;
    case ProblemClass::cluster: return MetricKind::silhouette;
  }
  throw ContractError("unhandled problem class");
}

double auroc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auroc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      const double y = labels[order[k]];
      if (y != 0.0 && y != 1.0) throw DomainError("auroc labels must be 0 or 1");
      if (y == 1.0) {
        positive_rank_sum += midrank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DomainError("auroc needs both positive and negative labels");
  const auto p = static_cast<double>(positives);
  const auto q = static_cast<double>(negatives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

double averaged_auroc(const Matrix& log_probs, std::span<const std::size_t> labels) {
  if (log_probs.rows() != labels.size()) throw DimensionError("averaged_auroc: row/label count mismatch");
  if (labels.size() < 2) throw DomainError("averaged_auroc needs at least 2 samples");
  std::set<std::size_t> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DomainError("averaged_auroc needs at least 2 distinct classes");
  std::vector<double> scores(labels.size()), binary(labels.size());
  double total = 0.0;
  for (std::size_t c : present) {
    if (c >= log_probs.cols()) throw IndexError("class label out of range in averaged_auroc");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      scores[i] = log_probs(i, c);
      binary[i] = labels[i] == c ? 1.0 : 0.0;
    }
    total += auroc(scores, binary);
  }
  return total / static_cast<double>(present.size());
}

double r_squared(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size()) throw DimensionError("r_squared: length mismatch");
  if (target.size() < 2) throw DomainError("r_squared needs at least 2 samples");
  const double mean = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    ss_res += (target[i] - prediction[i]) * (target[i] - prediction[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot == 0.0) throw DomainError("r_squared undefined for a constant target");
  return 1.0 - ss_res / ss_tot;
}

double silhouette(const Matrix& points, std::span<const std::size_t> assignments) {
  const std::size_t n = points.rows();
  if (assignments.size() != n) throw DimensionError("silhouette: assignment count mismatch");
  std::vector<std::size_t> labels(assignments.begin(), assignments.end());
  std::set<std::size_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2 || distinct.size() > n - 1) {
    throw DomainError("silhouette needs between 2 and n-1 clusters");
  }
  // Compact relabelling so per-cluster sums can live in a vector.
  std::vector<std::size_t> ids(distinct.begin(), distinct.end());
  for (auto& l : labels) l = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), l) - ids.begin());
  const std::size_t k = ids.size();
  std::vector<std::size_t> sizes(k, 0);
  for (auto l : labels) ++sizes[l];

  double total = 0.0;
  std::vector<double> sums(k);
  for (std::size_t i = 0; i < n; ++i) {
    if (sizes[labels[i]] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double sq = 0.0;
      for (std::size_t c = 0; c < points.cols(); ++c) {
        const double d = points(i, c) - points(j, c);
        sq += d * d;
      }
      sums[labels[j]] += std::sqrt(sq);
    }
    const double a = sums[labels[i]] / static_cast<double>(sizes[labels[i]] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c)
      if (c != labels[i]) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    const double denom = std::max(a, b);
    total += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return total / static_cast<double>(n);
}

double normalize_score(MetricKind kind, double raw) {
  switch (kind) {
    case MetricKind::auroc:
    case MetricKind::averaged_auroc: return raw;
    case MetricKind::r_squared: return std::clamp(raw, 0.0, 1.0);
    case MetricKind::silhouette: return (raw + 1.0) / 2.0;
  }
  return raw;
}

}  // namespace m3h
