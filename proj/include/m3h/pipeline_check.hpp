#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace m3h {

struct PipelineCheckOptions {
  double eps = 1e-5;
  std::size_t batch = 7;
  // Points closer than this to a ReLU, max or absolute-value kink are redrawn.
  double kink_margin = 1e-3;
  // Points with a nonzero gradient entry smaller than this are redrawn: a
  // central difference cannot resolve it against float64 rounding of the loss.
  double min_gradient = 1e-6;
  std::size_t max_draws = 1000;
};

struct TermCheck {
  std::uint64_t seed = 0;
  std::string term;  // a loss term name, or "total" for the sum of all terms
  std::string task;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t redraws = 0;  // points rejected before this one
};

// Central-difference check of every loss term (and their sum) through a small
// model with two modalities and one task of each problem class, at a random
// parameter point and batch drawn from `seed`. Throws NumericError when no
// draw within max_draws satisfies the margins.
std::vector<TermCheck> pipeline_gradcheck(std::uint64_t seed, const PipelineCheckOptions& options = {});

std::string format_gradcheck_report(const std::vector<TermCheck>& rows);

}  // namespace m3h
