#include "m3h/attention.hpp"

#include <string>

#include "m3h/error.hpp"

namespace m3h {

Matrix Tensor3::slice0(std::size_t i) const {
  Matrix out(n1_, n2_);
  for (std::size_t j = 0; j < n1_; ++j)
    for (std::size_t k = 0; k < n2_; ++k) out(j, k) = (*this)(i, j, k);
  return out;
}

Matrix Tensor3::slice1(std::size_t j) const {
  Matrix out(n0_, n2_);
  for (std::size_t i = 0; i < n0_; ++i)
    for (std::size_t k = 0; k < n2_; ++k) out(i, k) = (*this)(i, j, k);
  return out;
}

Tensor3 Tensor3::from_slices1(std::span<const Matrix> slices) {
  if (slices.empty()) return {};
  Tensor3 out(slices[0].rows(), slices.size(), slices[0].cols());
  for (std::size_t j = 0; j < slices.size(); ++j) {
    require_same_shape(slices[0], slices[j], "Tensor3::from_slices1");
    for (std::size_t i = 0; i < out.n0_; ++i)
      for (std::size_t k = 0; k < out.n2_; ++k) out(i, j, k) = slices[j](i, k);
  }
  return out;
}

namespace {

void require_finite(Var v, const char* stage) {
  if (!all_finite(v.value())) {
    throw NumericError(std::string("cross-task attention: non-finite ") + stage);
  }
}

}  // namespace

AttentionVars cross_task_attention(Tape& tape, std::span<const Var> x, const AttentionParamIds& ids,
                                   double alpha) {
  const std::size_t n_tasks = x.size();
  if (n_tasks == 0) throw DimensionError("cross-task attention over zero tasks");
  const std::size_t n_batch = x[0].rows();
  for (const Var& xt : x) {
    if (xt.rows() != n_batch) throw DimensionError("cross-task attention: ragged batch");
    require_finite(xt, "input");
  }
  const Var token = tape.param(ids.token);
  if (token.rows() != n_tasks) {
    throw DimensionError("cross-task attention: token matrix " + token.value().shape_string() +
                         " for " + std::to_string(n_tasks) + " tasks");
  }

  AttentionVars out;
  out.query = ad::matmul(token, tape.param(ids.query));
  require_finite(out.query, "query");
  const Var wk = tape.param(ids.key);
  const Var wv = tape.param(ids.value);
  for (std::size_t u = 0; u < n_tasks; ++u) {
    out.keys.push_back(ad::matmul(x[u], wk));
    out.values.push_back(ad::matmul(x[u], wv));
    require_finite(out.keys.back(), "key");
    require_finite(out.values.back(), "value");
    out.scores.push_back(ad::matmul_nt(out.keys.back(), out.query));
  }
  const Var all_scores = ad::concat_cols(out.scores);
  require_finite(all_scores, "pre-weights");
  out.denominator = ad::guarded_row_max(all_scores, kAttentionDenominatorFloor);

  for (std::size_t t = 0; t < n_tasks; ++t) {
    std::vector<Var> columns;
    columns.reserve(n_tasks);
    for (std::size_t u = 0; u < n_tasks; ++u) columns.push_back(ad::slice_cols(out.scores[u], t, 1));
    Var logits = ad::scale(ad::div_rows(ad::concat_cols(columns), out.denominator), alpha);
    Matrix self(n_batch, n_tasks);
    for (std::size_t b = 0; b < n_batch; ++b) self(b, t) = 1.0;
    logits = ad::add_constant(logits, self);
    require_finite(logits, "routing logits");
    out.routing.push_back(ad::softmax_rows(logits));

    Var mixed = ad::scale_rows(out.values[0], ad::slice_cols(out.routing.back(), 0, 1));
    for (std::size_t u = 1; u < n_tasks; ++u)
      mixed = ad::add(mixed, ad::scale_rows(out.values[u], ad::slice_cols(out.routing.back(), u, 1)));
    require_finite(mixed, "output");
    out.outputs.push_back(mixed);
  }
  return out;
}

AttentionTrace cross_task_attention(const Tensor3& x, const AttentionWeights& weights) {
  ParameterStore store;
  AttentionParamIds ids;
  ids.query = store.add("query", weights.query);
  ids.key = store.add("key", weights.key);
  ids.value = store.add("value", weights.value);
  ids.token = store.add("token", weights.token);

  Tape tape(&store);
  std::vector<Var> inputs;
  for (std::size_t t = 0; t < x.dim1(); ++t) inputs.push_back(tape.constant(x.slice1(t)));
  const AttentionVars vars = cross_task_attention(tape, inputs, ids, weights.alpha);

  const std::size_t n_batch = x.dim0();
  const std::size_t n_tasks = x.dim1();
  AttentionTrace trace;
  trace.query = vars.query.value();
  std::vector<Matrix> values, outputs;
  for (std::size_t t = 0; t < n_tasks; ++t) {
    values.push_back(vars.values[t].value());
    outputs.push_back(vars.outputs[t].value());
  }
  trace.values = Tensor3::from_slices1(values);
  trace.output = Tensor3::from_slices1(outputs);
  trace.pre_weights = Tensor3(n_batch, n_tasks, n_tasks);
  trace.routing = Tensor3(n_batch, n_tasks, n_tasks);
  for (std::size_t b = 0; b < n_batch; ++b) {
    for (std::size_t t = 0; t < n_tasks; ++t) {
      for (std::size_t u = 0; u < n_tasks; ++u) {
        trace.pre_weights(b, t, u) = vars.scores[u].value()(b, t);
        trace.routing(b, t, u) = vars.routing[t].value()(b, u);
      }
    }
  }
  return trace;
}

}  // namespace m3h
