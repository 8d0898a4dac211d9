#pragma once

#include <cstdint>
#include <vector>

#include "m3h/autodiff.hpp"

namespace m3h {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with per-parameter step counts. Only parameters marked touched in the
// gradient set are updated, so a loss term leaves parameters it never used
// exactly as they were.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterStore& params, AdamOptions options);

  void step(ParameterStore& params, const GradientSet& grads);
  std::uint64_t steps(std::size_t id) const { return steps_.at(id); }
  const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  std::vector<std::uint64_t> steps_;
};

}  // namespace m3h
