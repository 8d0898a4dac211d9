#include "m3h/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "m3h/error.hpp"
#include "m3h/random.hpp"

namespace m3h {

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DomainError("percentile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BootstrapResult bootstrap_compare(std::span<const double> scores_a, std::span<const double> scores_b,
                                  std::size_t n_boot, std::uint64_t seed,
                                  const ResampleStatistic& statistic) {
  if (scores_a.size() != scores_b.size()) {
    throw ContractError("bootstrap inputs differ in length (" + std::to_string(scores_a.size()) +
                        " vs " + std::to_string(scores_b.size()) + ")");
  }
  if (n_boot < 100) throw DomainError("bootstrap needs at least 100 resamples");
  if (scores_a.empty()) throw DomainError("bootstrap of an empty sample");

  const ResampleStatistic mean = [](std::span<const double> s, std::span<const std::size_t> idx) {
    double total = 0.0;
    for (auto i : idx) total += s[i];
    return total / static_cast<double>(idx.size());
  };
  const ResampleStatistic& stat = statistic ? statistic : mean;

  Rng rng(seed);
  const std::size_t n = scores_a.size();
  std::vector<std::size_t> idx(n);
  std::vector<double> deltas;
  deltas.reserve(n_boot);
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
    try {
      deltas.push_back(stat(scores_a, idx) - stat(scores_b, idx));
    } catch (const DomainError&) {
      // Draw cannot support the statistic.
    }
  }
  if (deltas.empty()) throw DomainError("no bootstrap resample produced a usable statistic");

  BootstrapResult out;
  out.used = deltas.size();
  double total = 0.0;
  for (double d : deltas) total += d;
  out.mean_delta = total / static_cast<double>(deltas.size());
  std::sort(deltas.begin(), deltas.end());
  out.lower = percentile(deltas, 0.025);
  out.upper = percentile(deltas, 0.975);
  return out;
}

}  // namespace m3h
