#pragma once

// Cross-task attention.
//
// Each jointly learned task owns a token; the token's embedding (a row of the
// token matrix) is projected into a batch-independent query. Keys and values
// come from the per-sample task embeddings produced by the task heads. For one
// sample with pre-weights M = Q K^T (tasks x tasks) the routing matrix is
//
//     W = softmax_rows(I + alpha * M / max(M))
//
// so a task keeps most of its own value vector (the identity term) and mixes in
// the others in proportion to their relevance, at a strength set by alpha.
// max(M) is taken per sample; when it is not positive the largest |M| entry is
// used instead, floored at kAttentionDenominatorFloor.

#include <cstddef>
#include <span>
#include <vector>

#include "m3h/autodiff.hpp"
#include "m3h/matrix.hpp"

namespace m3h {

inline constexpr double kAttentionDenominatorFloor = 1e-8;

// Dense [n0 x n1 x n2] tensor, last index fastest. Used for batch x task x feature.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t n0, std::size_t n1, std::size_t n2, double fill = 0.0)
      : n0_(n0), n1_(n1), n2_(n2), data_(n0 * n1 * n2, fill) {}

  std::size_t dim0() const { return n0_; }
  std::size_t dim1() const { return n1_; }
  std::size_t dim2() const { return n2_; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * n1_ + j) * n2_ + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * n1_ + j) * n2_ + k]; }
  std::span<const double> values() const { return data_; }

  // Slice [i, :, :] as an n1 x n2 matrix.
  Matrix slice0(std::size_t i) const;
  // Slice [:, j, :] as an n0 x n2 matrix.
  Matrix slice1(std::size_t j) const;
  // Inverse of slice1 for every j.
  static Tensor3 from_slices1(std::span<const Matrix> slices);

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n0_ = 0, n1_ = 0, n2_ = 0;
  std::vector<double> data_;
};

// Parameter ids of the four projections inside a ParameterStore.
//   query, key, value: n_feature x n_feature (applied on the right: x W)
//   token:             n_tasks x n_feature, row t embeds task token t
struct AttentionParamIds {
  std::size_t query = 0;
  std::size_t key = 0;
  std::size_t value = 0;
  std::size_t token = 0;
};

// Tape handles for every stage. Per-task quantities are n_batch-row matrices.
struct AttentionVars {
  Var query;                  // n_tasks x n_feature
  std::vector<Var> keys;      // per task u: n_batch x n_feature
  std::vector<Var> values;    // per task u
  std::vector<Var> scores;    // per key task u: n_batch x n_tasks, (b, t) = M[b][t][u]
  Var denominator;            // n_batch x 1
  std::vector<Var> routing;   // per query task t: n_batch x n_tasks, (b, u) = W[b][t][u]
  std::vector<Var> outputs;   // per task t: n_batch x n_feature
};

// x[t] is task t's embedding batch (n_batch x n_feature). Throws NumericError
// naming the stage when an intermediate is not finite.
AttentionVars cross_task_attention(Tape& tape, std::span<const Var> x, const AttentionParamIds& ids,
                                   double alpha);

struct AttentionWeights {
  Matrix query;
  Matrix key;
  Matrix value;
  Matrix token;
  double alpha = 0.1;
};

struct AttentionTrace {
  Matrix query;          // n_tasks x n_feature
  Tensor3 values;        // V: batch x tasks x feature
  Tensor3 pre_weights;   // M: batch x tasks x tasks
  Tensor3 routing;       // W: batch x tasks x tasks
  Tensor3 output;        // O: batch x tasks x feature
};

// Value-level evaluation through the same graph code; x is batch x tasks x feature.
AttentionTrace cross_task_attention(const Tensor3& x, const AttentionWeights& weights);

}  // namespace m3h
