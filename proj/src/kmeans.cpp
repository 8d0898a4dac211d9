#include "m3h/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "m3h/error.hpp"
#include "m3h/random.hpp"

namespace m3h {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Matrix plus_plus_seeds(const Matrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  Matrix centroids(k, points.cols());
  auto first = static_cast<std::size_t>(rng.below(n));
  std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points.row(i), centroids.row(c - 1)));
      total += nearest[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        target -= nearest[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
  }
  return centroids;
}

double assign(const Matrix& points, const Matrix& centroids, std::vector<std::size_t>& labels) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      const double d = squared_distance(points.row(i), centroids.row(c));
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    labels[i] = arg;
    inertia += best;
  }
  return inertia;
}

KMeansResult lloyd(const Matrix& points, Matrix centroids, const KMeansOptions& options) {
  const std::size_t n = points.rows();
  const std::size_t k = centroids.rows();
  const std::size_t d = points.cols();
  KMeansResult result;
  result.assignments.assign(n, 0);
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    result.inertia = assign(points, centroids, result.assignments);
    result.inertia_trace.push_back(result.inertia);
    result.iterations = iter + 1;

    Matrix next(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = result.assignments[i];
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) next(c, j) += points(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // Empty cluster: move it onto the point that is worst served right now.
        std::size_t far = 0;
        double worst = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dist = squared_distance(points.row(i), centroids.row(result.assignments[i]));
          if (dist > worst) {
            worst = dist;
            far = i;
          }
        }
        std::copy(points.row(far).begin(), points.row(far).end(), next.row(c).begin());
        continue;
      }
      for (double& x : next.row(c)) x /= static_cast<double>(counts[c]);
    }
    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c)
      shift = std::max(shift, std::sqrt(squared_distance(next.row(c), centroids.row(c))));
    centroids = std::move(next);
    if (shift < options.tolerance) break;
  }
  result.inertia = assign(points, centroids, result.assignments);
  result.inertia_trace.push_back(result.inertia);
  result.centroids = std::move(centroids);
  return result;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k < 2 || k >= points.rows()) {
    throw DomainError("kmeans needs 2 <= k < n (k=" + std::to_string(k) +
                      ", n=" + std::to_string(points.rows()) + ")");
  }
  if (options.restarts < 1) throw DomainError("kmeans needs at least one restart");
  if (!all_finite(points)) throw NumericError("kmeans on non-finite points");
  Rng rng(seed);
  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    KMeansResult run = lloyd(points, plus_plus_seeds(points, k, rng), options);
    if (!have || run.inertia < best.inertia) {
      best = std::move(run);
      have = true;
    }
  }
  return best;
}

}  // namespace m3h
