#pragma once

#include <cstdint>
#include <functional>
#include <span>

namespace m3h {

inline constexpr std::size_t kDefaultBootstrapResamples = 1000;

// Statistic of one resample: `indices` (with repeats) into the per-sample
// `scores`. May throw DomainError when a resample cannot support it (for
// example AUROC on a single-class draw); such draws are discarded.
using ResampleStatistic =
    std::function<double(std::span<const double> scores, std::span<const std::size_t> indices)>;

struct BootstrapResult {
  double mean_delta = 0.0;
  double lower = 0.0;  // 2.5th percentile of the deltas
  double upper = 0.0;  // 97.5th percentile
  std::size_t used = 0;  // resamples that produced a delta
};

// Paired percentile bootstrap of statistic(a) - statistic(b): both inputs are
// resampled with the same indices. The default statistic is the mean.
// Throws ContractError on a length mismatch and DomainError when
// n_boot < 100 or no resample yields a value.
BootstrapResult bootstrap_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                  std::size_t n_boot, std::uint64_t seed,
                                  const ResampleStatistic& statistic = {});

// Linear interpolation between order statistics, q in [0, 1]. `sorted` must be non-empty.
double percentile(std::span<const double> sorted, double q);

}  // namespace m3h
