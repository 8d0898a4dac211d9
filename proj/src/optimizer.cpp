#include "m3h/optimizer.hpp"

#include <cmath>

#include "m3h/error.hpp"

namespace m3h {

Adam::Adam(const ParameterStore& params, AdamOptions options)
    : options_(options), steps_(params.size(), 0) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = params.value(i);
    first_.emplace_back(v.rows(), v.cols());
    second_.emplace_back(v.rows(), v.cols());
  }
}

void Adam::step(ParameterStore& params, const GradientSet& grads) {
  if (grads.size() != steps_.size() || params.size() != steps_.size()) {
    throw DimensionError("optimizer state does not match the parameter store");
  }
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!grads.touched(p)) continue;
    const std::uint64_t t = ++steps_[p];
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    auto w = params.value(p).values();
    auto g = grads[p].values();
    auto m = first_[p].values();
    auto v = second_[p].values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      w[i] -= options_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + options_.epsilon);
    }
  }
}

}  // namespace m3h
