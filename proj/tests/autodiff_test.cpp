#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "m3h/autodiff.hpp"
#include "m3h/error.hpp"
#include "m3h/gradcheck.hpp"
#include "test_util.hpp"

using namespace m3h;
using fixture::away_from_zero;
using fixture::random_matrix;

namespace {

// One op under test: builds its output from the parameters "a" and "b".
struct OpCase {
  const char* name;
  std::size_t a_rows, a_cols, b_rows, b_cols;
  bool kinked;  // draw inputs away from zero
  std::function<Var(Tape&, Var, Var)> op;
};

std::vector<OpCase> op_cases() {
  static const std::vector<std::size_t> picked{2, 0, 2};
  return {
      {"matmul", 3, 4, 4, 2, false, [](Tape&, Var a, Var b) { return ad::matmul(a, b); }},
      {"matmul_nt", 3, 4, 2, 4, false, [](Tape&, Var a, Var b) { return ad::matmul_nt(a, b); }},
      {"transpose", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::transpose(a); }},
      {"add_bias", 3, 4, 1, 4, false, [](Tape&, Var a, Var b) { return ad::add_bias(a, b); }},
      {"add", 3, 4, 3, 4, false, [](Tape&, Var a, Var b) { return ad::add(a, b); }},
      {"sub", 3, 4, 3, 4, false, [](Tape&, Var a, Var b) { return ad::sub(a, b); }},
      {"scale", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::scale(a, -1.7); }},
      {"add_constant", 3, 4, 1, 1, false,
       [](Tape&, Var a, Var) { return ad::add_constant(a, Matrix(3, 4, 0.25)); }},
      {"hadamard", 3, 4, 3, 4, false, [](Tape&, Var a, Var b) { return ad::hadamard(a, b); }},
      {"relu", 3, 4, 1, 1, true, [](Tape&, Var a, Var) { return ad::relu(a); }},
      {"sigmoid", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::sigmoid(a); }},
      {"softmax_rows", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::softmax_rows(a); }},
      {"log_softmax_rows", 3, 4, 1, 1, false,
       [](Tape&, Var a, Var) { return ad::log_softmax_rows(a); }},
      {"concat_cols", 3, 4, 3, 2, false,
       [](Tape&, Var a, Var b) {
         const std::vector<Var> parts{a, b};
         return ad::concat_cols(parts);
       }},
      {"slice_cols", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::slice_cols(a, 1, 2); }},
      {"select_rows", 3, 4, 1, 1, false,
       [](Tape&, Var a, Var) { return ad::select_rows(a, picked); }},
      {"scale_rows", 3, 4, 3, 1, false, [](Tape&, Var a, Var b) { return ad::scale_rows(a, b); }},
      {"div_rows", 3, 4, 3, 1, true, [](Tape&, Var a, Var b) { return ad::div_rows(a, b); }},
      {"normalize_rows", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::normalize_rows(a); }},
      {"guarded_row_max", 3, 4, 1, 1, true,
       [](Tape&, Var a, Var) { return ad::guarded_row_max(a, 1e-8); }},
      {"sum", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::sum(a); }},
      {"mean", 3, 4, 1, 1, false, [](Tape&, Var a, Var) { return ad::mean(a); }},
  };
}

// Distinct entries keep the max selection away from its kink.
Matrix spread_entries(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double base = rng.uniform(-2.0, 2.0);
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = base;
      base += 0.1 + rng.uniform();
    }
    Rng local(rng.next());
    local.shuffle(m.row(r));
  }
  return m;
}

}  // namespace

TEST(Autodiff, EveryOpMatchesCentralDifferencesAtTenPoints) {
  for (const auto& c : op_cases()) {
    for (std::uint64_t point = 0; point < 10; ++point) {
      Rng rng(mix_seed(stable_hash(c.name), point));
      ParameterStore params;
      const bool is_max = std::string(c.name) == "guarded_row_max";
      params.add("a", is_max ? spread_entries(rng, c.a_rows, c.a_cols)
                             : c.kinked ? away_from_zero(rng, c.a_rows, c.a_cols)
                                        : random_matrix(rng, c.a_rows, c.a_cols));
      params.add("b", c.kinked ? away_from_zero(rng, c.b_rows, c.b_cols, 0.5)
                               : random_matrix(rng, c.b_rows, c.b_cols));
      Matrix weights;
      const LossBuilder loss = [&](Tape& tape) {
        const Var out = c.op(tape, tape.param("a"), tape.param("b"));
        if (weights.empty()) {
          Rng wr(point + 100);
          weights = random_matrix(wr, out.rows(), out.cols());
        }
        return ad::sum(ad::hadamard(out, tape.constant(weights)));
      };
      const GradCheckReport r = gradient_check(params, loss, 1e-5);
      EXPECT_LT(r.max_relative_error, 1e-4) << c.name << " point " << point << " worst " << r.worst_parameter;
    }
  }
}

TEST(Autodiff, UnreachableParameterGetsExactZero) {
  ParameterStore params;
  params.add("used", Matrix::from_rows({{1.0, -2.0}}));
  params.add("unused", Matrix::from_rows({{3.0}}));
  Tape tape(&params);
  const Var used = tape.param("used");
  const Var unused = tape.param("unused");
  (void)ad::scale(unused, 2.0);  // recorded but not on the loss path
  const GradientSet g = tape.backward(ad::sum(ad::hadamard(used, used)));
  EXPECT_EQ(g[0], Matrix::from_rows({{2.0, -4.0}}));
  EXPECT_EQ(g[1], Matrix(1, 1, 0.0));
  EXPECT_TRUE(g.touched(0));
  EXPECT_FALSE(g.touched(1));
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  ParameterStore params;
  params.add("x", Matrix::from_rows({{3.0}}));
  Tape tape(&params);
  const Var x = tape.param("x");
  // x*x + x*x + x -> derivative 4x + 1 = 13
  const Var sq = ad::hadamard(x, x);
  const GradientSet g = tape.backward(ad::sum(ad::add(ad::add(sq, sq), x)));
  EXPECT_DOUBLE_EQ(g[0](0, 0), 13.0);
}

TEST(Autodiff, RepeatedParamRequestsShareOneNode) {
  ParameterStore params;
  params.add("x", Matrix(2, 2, 1.0));
  Tape tape(&params);
  EXPECT_EQ(tape.param("x").id(), tape.param(0).id());
}

TEST(Autodiff, BackwardRejectsNonScalarAndNonFiniteLoss) {
  ParameterStore params;
  params.add("x", Matrix(2, 2, 1.0));
  Tape tape(&params);
  EXPECT_THROW(tape.backward(tape.param("x")), DimensionError);
  Tape tape2(&params);
  const Var bad = ad::scale(ad::sum(tape2.param("x")), std::numeric_limits<double>::infinity());
  EXPECT_THROW(tape2.backward(bad), NumericError);
}

TEST(Autodiff, ParameterStoreRejectsDuplicatesAndUnknownNames) {
  ParameterStore params;
  params.add("w", Matrix(1, 1));
  EXPECT_THROW(params.add("w", Matrix(1, 1)), ContractError);
  EXPECT_THROW(params.id("nope"), ContractError);
  EXPECT_FALSE(params.find("nope").has_value());
}

TEST(Autodiff, GuardedRowMaxFallsBackToLargestMagnitude) {
  Tape tape;
  const Var a = tape.constant(Matrix::from_rows({{0.5, -1.0}, {-0.2, -3.0}, {0.0, 0.0}}));
  const Matrix m = ad::guarded_row_max(a, 1e-8).value();
  EXPECT_DOUBLE_EQ(m(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(m(1, 0), 3.0);
  EXPECT_DOUBLE_EQ(m(2, 0), 1e-8);
}

TEST(Autodiff, KinkDistanceTracksReluInputs) {
  Tape tape;
  const Var a = tape.constant(Matrix::from_rows({{0.5, -0.02, 3.0}}));
  EXPECT_TRUE(std::isinf(tape.kink_distance()));
  (void)ad::relu(a);
  EXPECT_DOUBLE_EQ(tape.kink_distance(), 0.02);
}

TEST(Autodiff, GradientSetNormAndScale) {
  ParameterStore params;
  params.add("a", Matrix::from_rows({{0.0}}));
  params.add("b", Matrix::from_rows({{0.0, 0.0}}));
  GradientSet g(params);
  g[0](0, 0) = 3.0;
  g[1](0, 1) = 4.0;
  EXPECT_DOUBLE_EQ(g.global_norm(), 5.0);
  g.scale(0.5);
  EXPECT_DOUBLE_EQ(g.global_norm(), 2.5);
}
