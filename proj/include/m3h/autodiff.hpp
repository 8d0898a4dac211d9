#pragma once

// Reverse-mode differentiation over Matrix values.
//
// A Tape records every operation applied to its Vars. Leaves are either
// constants or references into a ParameterStore; Tape::backward walks the
// recording in reverse and accumulates d(loss)/d(parameter) into a
// GradientSet. Parameters that appear on the tape but are not reachable from
// the loss receive an exactly-zero gradient.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "m3h/matrix.hpp"

namespace m3h {

class ParameterStore {
 public:
  // Throws ContractError on duplicate names.
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  const std::string& name(std::size_t id) const { return entries_.at(id).name; }
  Matrix& value(std::size_t id) { return entries_.at(id).value; }
  const Matrix& value(std::size_t id) const { return entries_.at(id).value; }

  std::optional<std::size_t> find(std::string_view name) const;
  // Throws ContractError when absent.
  std::size_t id(std::string_view name) const;
  Matrix& operator[](std::string_view name) { return value(id(name)); }
  const Matrix& operator[](std::string_view name) const { return value(id(name)); }

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  struct Entry {
    std::string name;
    Matrix value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

class GradientSet {
 public:
  GradientSet() = default;
  explicit GradientSet(const ParameterStore& params);

  std::size_t size() const { return grads_.size(); }
  Matrix& operator[](std::size_t id) { return grads_.at(id); }
  const Matrix& operator[](std::size_t id) const { return grads_.at(id); }

  // A parameter is touched when it took part in the forward computation.
  bool touched(std::size_t id) const { return touched_.at(id) != 0; }
  void mark_touched(std::size_t id) { touched_.at(id) = 1; }

  double global_norm() const;
  void scale(double factor);

 private:
  std::vector<Matrix> grads_;
  std::vector<char> touched_;
};

class Tape;

class Var {
 public:
  Var() = default;
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

// Handed to an operation's backward function.
class BackwardContext {
 public:
  bool needs(std::size_t input) const;
  const Matrix& input(std::size_t input) const;
  const Matrix& output() const;
  // Zero-initialized on first use; accumulate into it in place.
  Matrix& grad(std::size_t input);

 private:
  friend class Tape;
  BackwardContext(const Tape& tape, std::vector<Matrix>& grads, std::uint32_t node)
      : tape_(tape), grads_(grads), node_(node) {}
  const Tape& tape_;
  std::vector<Matrix>& grads_;
  std::uint32_t node_;
};

class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& grad_out, BackwardContext& ctx)>;

  explicit Tape(const ParameterStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Same Var for repeated requests of one parameter.
  Var param(std::size_t id);
  Var param(std::string_view name);

  const Matrix& value(Var v) const { return nodes_.at(v.id()).value; }
  const Matrix& value(std::uint32_t id) const { return nodes_.at(id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id()).requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // loss must be 1x1. Gradients are added to `grads`, which must be sized
  // for the store this tape was built on.
  void backward(Var loss, GradientSet& grads) const;
  GradientSet backward(Var loss) const;

  // Used by operation implementations.
  Var record(Matrix value, std::vector<Var> inputs, BackwardFn backward);

  // Non-smooth operations (ReLU, max selection, absolute error) report how far
  // their inputs sit from a kink. A finite-difference step smaller than this
  // distance stays on one smooth piece.
  void note_kink(double distance) { kink_distance_ = std::min(kink_distance_, distance); }
  double kink_distance() const { return kink_distance_; }

 private:
  friend class BackwardContext;
  struct Node {
    Matrix value;
    std::vector<std::uint32_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    std::optional<std::size_t> param;
  };
  const ParameterStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, std::uint32_t> param_nodes_;
  double kink_distance_ = std::numeric_limits<double>::infinity();
};

namespace ad {

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
// x + b with b a 1 x cols row broadcast down the rows.
Var add_bias(Var x, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var add_constant(Var a, const Matrix& c);
Var hadamard(Var a, Var b);
Var relu(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var select_rows(Var a, std::span<const std::size_t> rows);
// Row r of `a` multiplied by column(r, 0).
Var scale_rows(Var a, Var column);
// Row r of `a` divided by column(r, 0).
Var div_rows(Var a, Var column);
// Unit L2 norm per row.
Var normalize_rows(Var a);
// Per row: its maximum entry when that exceeds `floor`, otherwise the largest
// absolute entry, itself floored at `floor`. Returns rows x 1.
Var guarded_row_max(Var a, double floor);
Var sum(Var a);
Var mean(Var a);

}  // namespace ad
}  // namespace m3h
