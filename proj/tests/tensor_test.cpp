// Copyright 2026  sasv-backend authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "sasv/tape.hpp"
#include "sasv/tensor.hpp"
#include "test_util.hpp"

namespace sasv {
namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.begin()->size()));
  Index r = 0;
  for (const auto& row : rows) {
    Index c = 0;
    for (double x : row) m(r, c++) = x;
    ++r;
  }
  return m;
}

Mask mask(std::initializer_list<bool> flags) {
  Mask m(static_cast<Index>(flags.size()));
  Index i = 0;
  for (bool f : flags) m(i++) = f;
  return m;
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix m = mat({{0.3, -2.0}, {7.5, 1e-3}});
  EXPECT_EQ(matmul(Matrix::Identity(2, 2), m), m);
}

TEST(Matmul, ZeroColumn) {
  EXPECT_EQ(matmul(mat({{1, 2}, {3, 4}}), mat({{0}, {0}})), mat({{0}, {0}}));
}

TEST(Matmul, HandComputedProduct) {
  EXPECT_EQ(matmul(mat({{1, 2}, {3, 4}}), mat({{5}, {6}})), mat({{17}, {39}}));
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Matrix::Zero(2, 3), Matrix::Zero(4, 5));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("(2x3)"), std::string::npos) << what;
    EXPECT_NE(what.find("(4x5)"), std::string::npos) << what;
  }
}

TEST(SoftmaxMasked, UniformWhenLogitsEqual) {
  const Vector p = softmax_masked(Vector::Zero(3), mask({false, false, false}));
  for (Index i = 0; i < 3; ++i) EXPECT_NEAR(p(i), 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxMasked, SingleUnmaskedEntryTakesAllWeight) {
  Vector logits(2);
  logits << 5, 1;
  const Vector p = softmax_masked(logits, mask({false, true}));
  EXPECT_EQ(p(0), 1.0);
  EXPECT_EQ(p(1), 0.0);
}

TEST(SoftmaxMasked, DirectEvaluation) {
  Vector logits(3);
  logits << 1, 2, 3;
  const Vector p = softmax_masked(logits, mask({false, false, false}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(p(0), std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(p(1), std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(p(2), std::exp(3.0) / z, 1e-15);
  EXPECT_NEAR(p(0), 0.09003057, 1e-8);
  EXPECT_NEAR(p(1), 0.24472847, 1e-8);
  EXPECT_NEAR(p(2), 0.66524096, 1e-8);
}

TEST(SoftmaxMasked, AllMaskedIsDegenerate) {
  EXPECT_THROW(softmax_masked(Vector::Zero(2), mask({true, true})),
               DegenerateMaskError);
}

TEST(SoftmaxMasked, SumsToOneAndMaskedWeightsAreExactlyZero) {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 1 + trial % 17;
    const Vector logits = testing::random_vector(n, rng, 10.0);
    Mask excluded(n);
    for (Index i = 0; i < n; ++i) excluded(i) = coin(rng);
    excluded(trial % n) = false;
    const Vector p = softmax_masked(logits, excluded);
    double total = 0;
    for (Index i = 0; i < n; ++i) {
      if (excluded(i)) {
        EXPECT_EQ(p(i), 0.0);
      } else {
        total += p(i);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Sigmoid, Values) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(1.0), 0.7310585786, 1e-10);
  EXPECT_NEAR(sigmoid(-3.7), 1.0 - sigmoid(3.7), 1e-15);
  EXPECT_GT(sigmoid(-800.0), -1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Cosine, ZeroNormThrows) {
  EXPECT_THROW(cosine(Vector::Zero(3), Vector::Ones(3)), NormError);
}

TEST(Backward, Square) {
  GradTape tape;
  Var p = tape.parameter("p", Matrix::Constant(1, 1, 3.0));
  Var loss = cwise_product(p, p);
  tape.backward(loss);
  EXPECT_EQ(tape.grad(p)(0, 0), 6.0);
}

TEST(Backward, SigmoidSlopeAtZero) {
  GradTape tape;
  Var p = tape.parameter("p", Matrix::Zero(1, 1));
  tape.backward(sigmoid(p));
  EXPECT_EQ(tape.grad(p)(0, 0), 0.25);
}

TEST(Backward, LossFromAnotherTapeIsATrackingError) {
  GradTape a;
  GradTape b;
  Var p = b.parameter("p", Matrix::Ones(1, 1));
  EXPECT_THROW(a.backward(sum(p)), TrackingError);
}

TEST(Backward, RepeatedBackwardIsBitwiseIdentical) {
  std::mt19937_64 rng(5);
  GradTape tape;
  Var w = tape.parameter("w", Matrix(testing::random_vector(12, rng)).reshaped<Eigen::RowMajor>(3, 4));
  Var x = tape.constant(Matrix(testing::random_vector(8, rng)).reshaped<Eigen::RowMajor>(2, 4));
  Var loss = sum(tanh(matmul(x, transpose(w))));
  tape.backward(loss);
  const Matrix first = tape.grad(w);
  tape.backward(loss);
  EXPECT_EQ(first, tape.grad(w));
}

TEST(Backward, ConstantsReceiveNoGradient) {
  GradTape tape;
  Var c = tape.constant(Matrix::Ones(2, 2));
  Var p = tape.parameter("p", Matrix::Ones(2, 2));
  tape.backward(sum(cwise_product(c, p)));
  EXPECT_FALSE(tape.tracked(c));
  EXPECT_EQ(tape.grad(c), Matrix::Zero(2, 2));
  EXPECT_EQ(tape.grad(p), Matrix::Ones(2, 2));
}

// Central differences of a scalar function of one matrix argument.
Matrix numeric_gradient(const std::function<double(const Matrix&)>& f,
                        Matrix x) {
  const double h = 1e-6;
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f(x);
    x.data()[i] = saved - h;
    const double down = f(x);
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

using Op = std::function<Var(GradTape&, Var)>;

struct OpCase {
  const char* name;
  Index rows, cols;
  Op op;
};

void PrintTo(const OpCase& c, std::ostream* os) { *os << c.name; }

class TapeOpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(TapeOpGradient, MatchesFiniteDifferences) {
  const OpCase& c = GetParam();
  std::mt19937_64 rng(42);
  const Matrix x0 =
      Matrix(testing::random_vector(c.rows * c.cols, rng)).reshaped<Eigen::RowMajor>(c.rows, c.cols);
  // Fixed random projection to a scalar so every output entry matters.
  const Matrix probe_seed = Matrix(testing::random_vector(64, rng));

  auto evaluate = [&](const Matrix& x, Matrix* grad) {
    GradTape tape;
    Var p = tape.parameter("x", x);
    Var y = c.op(tape, p);
    Matrix probe(y.rows(), y.cols());
    for (Index i = 0; i < probe.size(); ++i) probe.data()[i] = probe_seed(i % 64);
    Var loss = sum(cwise_product(y, tape.constant(probe)));
    if (grad) {
      tape.backward(loss);
      *grad = tape.grad(p);
    }
    return loss.scalar();
  };
  Matrix analytic;
  evaluate(x0, &analytic);
  const Matrix numeric =
      numeric_gradient([&](const Matrix& x) { return evaluate(x, nullptr); }, x0);
  for (Index i = 0; i < x0.size(); ++i) {
    EXPECT_NEAR(analytic.data()[i], numeric.data()[i],
                1e-6 * (1 + std::abs(numeric.data()[i])))
        << c.name << " entry " << i;
  }
}

Matrix fixed(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return Matrix(testing::random_vector(rows * cols, rng)).reshaped<Eigen::RowMajor>(rows, cols);
}

INSTANTIATE_TEST_SUITE_P(
    Ops, TapeOpGradient,
    ::testing::Values(
        OpCase{"matmul_left", 3, 4,
               [](GradTape& t, Var x) { return matmul(x, t.constant(fixed(4, 2, 1))); }},
        OpCase{"matmul_right", 4, 2,
               [](GradTape& t, Var x) { return matmul(t.constant(fixed(3, 4, 2)), x); }},
        OpCase{"transpose", 2, 3, [](GradTape&, Var x) { return transpose(x); }},
        OpCase{"add_sub", 2, 3,
               [](GradTape& t, Var x) { return (x + t.constant(fixed(2, 3, 3))) - 2.5 * x; }},
        OpCase{"cwise_product", 2, 3,
               [](GradTape& t, Var x) { return cwise_product(x, cwise_product(x, t.constant(fixed(2, 3, 4)))); }},
        OpCase{"scale_by", 1, 1,
               [](GradTape& t, Var s) { return scale_by(s, t.constant(fixed(2, 3, 5))); }},
        OpCase{"shift_by", 2, 2,
               [](GradTape&, Var x) { return shift_by(x, sum(cwise_product(x, x))); }},
        OpCase{"add_rowwise", 3, 1,
               [](GradTape& t, Var b) { return add_rowwise(t.constant(fixed(4, 3, 6)), b); }},
        OpCase{"tanh", 2, 3, [](GradTape&, Var x) { return tanh(x); }},
        OpCase{"sigmoid", 2, 3, [](GradTape&, Var x) { return sigmoid(x); }},
        OpCase{"softmax_rows_masked", 3, 4,
               [](GradTape&, Var x) {
                 Mask excl(4);
                 excl << false, true, false, false;
                 return softmax_rows_masked(x, excl);
               }},
        OpCase{"softmax_vector_masked", 5, 1,
               [](GradTape&, Var x) {
                 Mask excl(5);
                 excl << false, false, true, false, true;
                 return softmax_vector_masked(x, excl);
               }},
        OpCase{"gather_rows", 3, 2,
               [](GradTape&, Var x) {
                 const std::vector<Index> rows{2, 0, 2};
                 return gather_rows(x, rows);
               }},
        OpCase{"mask_rows", 3, 2,
               [](GradTape&, Var x) {
                 Mask keep(3);
                 keep << true, false, true;
                 return mask_rows(x, keep);
               }},
        OpCase{"stack_rows", 2, 3,
               [](GradTape& t, Var x) {
                 const std::vector<Var> parts{x, t.constant(fixed(1, 3, 7)), x};
                 return stack_rows(parts);
               }},
        OpCase{"row_cosine", 3, 4,
               [](GradTape& t, Var x) { return row_cosine(x, t.constant(fixed(3, 4, 8))); }},
        OpCase{"binary_cross_entropy", 4, 1,
               [](GradTape&, Var x) {
                 Mask positive(4);
                 positive << true, false, true, false;
                 return binary_cross_entropy(sigmoid(x), positive);
               }},
        OpCase{"mean", 3, 3, [](GradTape&, Var x) { return mean(cwise_product(x, x)); }}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });

}  // namespace
}  // namespace sasv
