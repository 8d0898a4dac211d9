#pragma once

#include <cstdint>
#include <vector>

#include "m3h/matrix.hpp"

namespace m3h {

struct KMeansOptions {
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  double tolerance = 1e-6;  // stop once no centroid moves farther than this
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Matrix centroids;
  double inertia = 0.0;
  std::size_t iterations = 0;
  // Inertia after each assignment step of the winning restart.
  std::vector<double> inertia_trace;
};

// Lloyd iterations from k-means++ seeds, best inertia over `restarts` runs.
// Requires 2 <= k < rows (DomainError otherwise). A cluster that empties is
// re-seeded at the point farthest from its current centroid.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

}  // namespace m3h
