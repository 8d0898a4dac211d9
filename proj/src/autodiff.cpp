#include "m3h/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "m3h/error.hpp"

namespace m3h {

// ---------------------------------------------------------------------------
// ParameterStore / GradientSet

std::size_t ParameterStore::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  const std::size_t id = entries_.size();
  index_.emplace(name, id);
  entries_.push_back({std::move(name), std::move(value)});
  return id;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::optional<std::size_t> ParameterStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t ParameterStore::id(std::string_view name) const {
  auto found = find(name);
  if (!found) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return *found;
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  return a.entries_ == b.entries_;
}

GradientSet::GradientSet(const ParameterStore& params) : touched_(params.size(), 0) {
  grads_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& v = params.value(i);
    grads_.emplace_back(v.rows(), v.cols());
  }
}

double GradientSet::global_norm() const {
  double total = 0.0;
  for (const auto& g : grads_)
    for (double x : g.values()) total += x * x;
  return std::sqrt(total);
}

void GradientSet::scale(double factor) {
  for (auto& g : grads_)
    for (double& x : g.values()) x *= factor;
}

// ---------------------------------------------------------------------------
// Tape

const Matrix& Var::value() const { return tape_->value(*this); }

bool BackwardContext::needs(std::size_t input) const {
  const auto& node = tape_.nodes_[node_];
  return tape_.nodes_[node.inputs.at(input)].requires_grad;
}

const Matrix& BackwardContext::input(std::size_t input) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs.at(input)].value;
}

const Matrix& BackwardContext::output() const { return tape_.nodes_[node_].value; }

Matrix& BackwardContext::grad(std::size_t input) {
  const std::uint32_t target = tape_.nodes_[node_].inputs.at(input);
  Matrix& slot = grads_[target];
  if (slot.empty()) {
    const Matrix& v = tape_.nodes_[target].value;
    slot = Matrix(v.rows(), v.cols());
  }
  return slot;
}

Var Tape::constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::param(std::size_t id) {
  if (params_ == nullptr) throw ContractError("tape has no parameter store");
  if (auto it = param_nodes_.find(id); it != param_nodes_.end()) return Var(this, it->second);
  Node node;
  node.value = params_->value(id);
  node.requires_grad = true;
  node.param = id;
  nodes_.push_back(std::move(node));
  const auto nid = static_cast<std::uint32_t>(nodes_.size() - 1);
  param_nodes_.emplace(id, nid);
  return Var(this, nid);
}

Var Tape::param(std::string_view name) {
  if (params_ == nullptr) throw ContractError("tape has no parameter store");
  return param(params_->id(name));
}

Var Tape::record(Matrix value, std::vector<Var> inputs, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    if (&in.tape() != this) throw ContractError("operands recorded on different tapes");
    node.inputs.push_back(in.id());
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::backward(Var loss, GradientSet& grads) const {
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward needs a 1x1 loss, got " + lv.shape_string());
  }
  if (!std::isfinite(lv(0, 0))) throw NumericError("backward called on a non-finite loss");
  std::vector<Matrix> node_grads(nodes_.size());
  node_grads[loss.id()] = Matrix(1, 1, 1.0);
  for (std::uint32_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (node_grads[i].empty() || !node.backward) continue;
    BackwardContext ctx(*this, node_grads, i);
    node.backward(node_grads[i], ctx);
  }
  for (const auto& [param_id, node_id] : param_nodes_) {
    if (node_grads[node_id].empty()) continue;
    grads.mark_touched(param_id);
    axpy(grads[param_id], 1.0, node_grads[node_id]);
  }
}

GradientSet Tape::backward(Var loss) const {
  if (params_ == nullptr) throw ContractError("tape has no parameter store");
  GradientSet grads(*params_);
  backward(loss, grads);
  return grads;
}

// ---------------------------------------------------------------------------
// Operations

namespace ad {
namespace {

Matrix zeros_like(const Matrix& m) { return Matrix(m.rows(), m.cols()); }

void add_into(Matrix& dst, const Matrix& src) { axpy(dst, 1.0, src); }

template <typename F>
Matrix map(const Matrix& m, F f) {
  Matrix out = zeros_like(m);
  auto in = m.values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  return a.tape().record(m3h::matmul(a.value(), b.value()), {a, b},
                         [](const Matrix& g, BackwardContext& ctx) {
                           if (ctx.needs(0)) add_into(ctx.grad(0), matmul_nt(g, ctx.input(1)));
                           if (ctx.needs(1)) add_into(ctx.grad(1), matmul_tn(ctx.input(0), g));
                         });
}

Var matmul_nt(Var a, Var b) {
  return a.tape().record(m3h::matmul_nt(a.value(), b.value()), {a, b},
                         [](const Matrix& g, BackwardContext& ctx) {
                           if (ctx.needs(0)) add_into(ctx.grad(0), m3h::matmul(g, ctx.input(1)));
                           if (ctx.needs(1)) add_into(ctx.grad(1), matmul_tn(g, ctx.input(0)));
                         });
}

Var transpose(Var a) {
  return a.tape().record(m3h::transpose(a.value()), {a},
                         [](const Matrix& g, BackwardContext& ctx) {
                           add_into(ctx.grad(0), m3h::transpose(g));
                         });
}

Var add_bias(Var x, Var b) {
  const Matrix& xv = x.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw DimensionError("add_bias: shape mismatch " + xv.shape_string() + " vs " +
                         bv.shape_string());
  }
  Matrix out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  return x.tape().record(std::move(out), {x, b}, [](const Matrix& g, BackwardContext& ctx) {
    if (ctx.needs(0)) add_into(ctx.grad(0), g);
    if (ctx.needs(1)) {
      Matrix& gb = ctx.grad(1);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
    }
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  axpy(out, 1.0, b.value());
  return a.tape().record(std::move(out), {a, b}, [](const Matrix& g, BackwardContext& ctx) {
    if (ctx.needs(0)) add_into(ctx.grad(0), g);
    if (ctx.needs(1)) add_into(ctx.grad(1), g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  axpy(out, -1.0, b.value());
  return a.tape().record(std::move(out), {a, b}, [](const Matrix& g, BackwardContext& ctx) {
    if (ctx.needs(0)) add_into(ctx.grad(0), g);
    if (ctx.needs(1)) axpy(ctx.grad(1), -1.0, g);
  });
}

Var scale(Var a, double s) {
  return a.tape().record(map(a.value(), [s](double x) { return s * x; }), {a},
                         [s](const Matrix& g, BackwardContext& ctx) { axpy(ctx.grad(0), s, g); });
}

Var add_constant(Var a, const Matrix& c) {
  require_same_shape(a.value(), c, "add_constant");
  Matrix out = a.value();
  axpy(out, 1.0, c);
  return a.tape().record(std::move(out), {a}, [](const Matrix& g, BackwardContext& ctx) {
    add_into(ctx.grad(0), g);
  });
}

Var hadamard(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "hadamard");
  Matrix out = a.value();
  auto o = out.values();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [](const Matrix& g, BackwardContext& ctx) {
    auto gv = g.values();
    if (ctx.needs(0)) {
      auto d = ctx.grad(0).values();
      auto other = ctx.input(1).values();
      for (std::size_t i = 0; i < gv.size(); ++i) d[i] += gv[i] * other[i];
    }
    if (ctx.needs(1)) {
      auto d = ctx.grad(1).values();
      auto other = ctx.input(0).values();
      for (std::size_t i = 0; i < gv.size(); ++i) d[i] += gv[i] * other[i];
    }
  });
}

Var relu(Var a) {
  for (double x : a.value().values()) a.tape().note_kink(std::abs(x));
  return a.tape().record(map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), {a},
                         [](const Matrix& g, BackwardContext& ctx) {
                           auto d = ctx.grad(0).values();
                           auto in = ctx.input(0).values();
                           auto gv = g.values();
                           for (std::size_t i = 0; i < gv.size(); ++i)
                             if (in[i] > 0.0) d[i] += gv[i];
                         });
}

Var sigmoid(Var a) {
  auto sig = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  };
  return a.tape().record(map(a.value(), sig), {a}, [](const Matrix& g, BackwardContext& ctx) {
    auto d = ctx.grad(0).values();
    auto y = ctx.output().values();
    auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) d[i] += gv[i] * y[i] * (1.0 - y[i]);
  });
}

Var softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out = zeros_like(av);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto p = m3h::softmax(av.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return a.tape().record(std::move(out), {a}, [](const Matrix& g, BackwardContext& ctx) {
    const Matrix& y = ctx.output();
    Matrix& d = ctx.grad(0);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  const Matrix& av = a.value();
  Matrix out = zeros_like(av);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto p = m3h::log_softmax(av.row(r));
    std::copy(p.begin(), p.end(), out.row(r).begin());
  }
  return a.tape().record(std::move(out), {a}, [](const Matrix& g, BackwardContext& ctx) {
    const Matrix& y = ctx.output();
    Matrix& d = ctx.grad(0);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) total += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) += g(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().value().shape_string() +
                           " vs " + p.value().shape_string());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(v.row(r).begin(), v.row(r).end(), out.row(r).begin() + static_cast<long>(offset));
    offsets.push_back(offset);
    offset += v.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(
      std::move(out), std::move(inputs),
      [offsets](const Matrix& g, BackwardContext& ctx) {
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          if (!ctx.needs(k)) continue;
          Matrix& d = ctx.grad(k);
          for (std::size_t r = 0; r < d.rows(); ++r)
            for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) += g(r, offsets[k] + c);
        }
      });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = a.value();
  if (begin + count > av.cols()) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of " + av.shape_string());
  }
  Matrix out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  return a.tape().record(std::move(out), {a}, [begin](const Matrix& g, BackwardContext& ctx) {
    Matrix& d = ctx.grad(0);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) d(r, begin + c) += g(r, c);
  });
}

Var select_rows(Var a, std::span<const std::size_t> rows) {
  const Matrix& av = a.value();
  Matrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) {
      throw IndexError("select_rows: row " + std::to_string(rows[i]) + " out of " +
                       av.shape_string());
    }
    std::copy(av.row(rows[i]).begin(), av.row(rows[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return a.tape().record(std::move(out), {a},
                         [idx = std::move(idx)](const Matrix& g, BackwardContext& ctx) {
                           Matrix& d = ctx.grad(0);
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             for (std::size_t c = 0; c < g.cols(); ++c) d(idx[i], c) += g(i, c);
                         });
}

Var scale_rows(Var a, Var column) {
  const Matrix& av = a.value();
  const Matrix& cv = column.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("scale_rows: shape mismatch " + av.shape_string() + " vs " +
                         cv.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& x : out.row(r)) x *= cv(r, 0);
  return a.tape().record(std::move(out), {a, column}, [](const Matrix& g, BackwardContext& ctx) {
    const Matrix& x = ctx.input(0);
    const Matrix& s = ctx.input(1);
    if (ctx.needs(0)) {
      Matrix& d = ctx.grad(0);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) += g(r, c) * s(r, 0);
    }
    if (ctx.needs(1)) {
      Matrix& d = ctx.grad(1);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d(r, 0) += g(r, c) * x(r, c);
    }
  });
}

Var div_rows(Var a, Var column) {
  const Matrix& av = a.value();
  const Matrix& cv = column.value();
  if (cv.cols() != 1 || cv.rows() != av.rows()) {
    throw DimensionError("div_rows: shape mismatch " + av.shape_string() + " vs " +
                         cv.shape_string());
  }
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (double& x : out.row(r)) x /= cv(r, 0);
  return a.tape().record(std::move(out), {a, column}, [](const Matrix& g, BackwardContext& ctx) {
    const Matrix& y = ctx.output();
    const Matrix& s = ctx.input(1);
    if (ctx.needs(0)) {
      Matrix& d = ctx.grad(0);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) += g(r, c) / s(r, 0);
    }
    if (ctx.needs(1)) {
      Matrix& d = ctx.grad(1);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d(r, 0) -= g(r, c) * y(r, c) / s(r, 0);
    }
  });
}

Var normalize_rows(Var a) {
  constexpr double kMinNorm = 1e-12;
  const Matrix& av = a.value();
  Matrix out = av;
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double sq = 0.0;
    for (double x : av.row(r)) sq += x * x;
    norms[r] = std::max(std::sqrt(sq), kMinNorm);
    for (double& x : out.row(r)) x /= norms[r];
  }
  return a.tape().record(std::move(out), {a},
                         [norms = std::move(norms)](const Matrix& g, BackwardContext& ctx) {
                           const Matrix& y = ctx.output();
                           Matrix& d = ctx.grad(0);
                           for (std::size_t r = 0; r < y.rows(); ++r) {
                             if (norms[r] <= kMinNorm) {
                               for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) += g(r, c) / norms[r];
                               continue;
                             }
                             double dot = 0.0;
                             for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                             for (std::size_t c = 0; c < y.cols(); ++c)
                               d(r, c) += (g(r, c) - y(r, c) * dot) / norms[r];
                           }
                         });
}

Var guarded_row_max(Var a, double floor) {
  const Matrix& av = a.value();
  if (av.cols() == 0) throw DimensionError("guarded_row_max of a matrix without columns");
  Matrix out(av.rows(), 1);
  // Per row: which entry the value came from and with what sign; -1 if floored.
  std::vector<std::ptrdiff_t> source(av.rows(), -1);
  std::vector<double> sign(av.rows(), 1.0);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    auto row = av.row(r);
    const auto top = std::max_element(row.begin(), row.end());
    for (auto it = row.begin(); it != row.end(); ++it) {
      if (it != top) a.tape().note_kink(*top - *it);
      a.tape().note_kink(std::abs(std::abs(*it) - floor));
    }
    if (*top > floor) {
      out(r, 0) = *top;
      source[r] = top - row.begin();
      continue;
    }
    const auto big = std::max_element(row.begin(), row.end(),
                                       [](double x, double y) { return std::abs(x) < std::abs(y); });
    if (std::abs(*big) > floor) {
      out(r, 0) = std::abs(*big);
      source[r] = big - row.begin();
      sign[r] = *big < 0.0 ? -1.0 : 1.0;
    } else {
      out(r, 0) = floor;
    }
  }
  return a.tape().record(
      std::move(out), {a},
      [source = std::move(source), sign = std::move(sign)](const Matrix& g, BackwardContext& ctx) {
        Matrix& d = ctx.grad(0);
        for (std::size_t r = 0; r < source.size(); ++r)
          if (source[r] >= 0) d(r, static_cast<std::size_t>(source[r])) += sign[r] * g(r, 0);
      });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().values()) total += x;
  return a.tape().record(Matrix(1, 1, total), {a}, [](const Matrix& g, BackwardContext& ctx) {
    for (double& x : ctx.grad(0).values()) x += g(0, 0);
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DomainError("mean of an empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

}  // namespace ad
}  // namespace m3h
