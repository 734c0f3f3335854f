// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "lipread/ctc.hpp"
#include "lipread/error.hpp"
#include "lipread/tensor.hpp"

using namespace lipread;

TEST(TensorCreate, ZeroFill) {
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
  for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(TensorCreate, ConstantFill) {
  Tensor t({1}, 7.5);
  EXPECT_EQ(t[0], 7.5);
}

TEST(TensorCreate, SeededFillIsDeterministic) {
  Tensor a({2, 2}, RandomFill{42});
  Tensor b({2, 2}, RandomFill{42});
  Tensor c({2, 2}, RandomFill{43});
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (double v : a.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(TensorCreate, RejectsZeroExtent) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(TensorIndex, RowMajorRoundTrip) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.flat_index({1, 2, 3}), 23u);
  EXPECT_EQ(t.unravel(23), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_THROW(t.flat_index({2, 0, 0}), ShapeError);
  EXPECT_EQ(strides_of({2, 3, 4}), (Shape{12, 4, 1}));
}

TEST(TensorReshape, KeepsValuesChecksCount) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.at({2, 1}), 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), ShapeError);
}

TEST(Matmul, Identity) {
  Tensor b = Tensor::matrix({{5, 6}, {7, 8}});
  EXPECT_EQ(matmul(Tensor::matrix({{1, 0}, {0, 1}}), b), b);
}

TEST(Matmul, HandComputed) {
  Tensor c = matmul(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{5, 6}, {7, 8}}));
  EXPECT_EQ(c, Tensor::matrix({{19, 22}, {43, 50}}));
}

TEST(Matmul, ZeroAndShapeMismatch) {
  Tensor z({2, 3});
  Tensor b({3, 4}, RandomFill{1});
  const Tensor zb = matmul(z, b);
  for (double v : zb.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(matmul(b, z), ShapeError);
}

TEST(Matmul, AgreesWithTripleLoop) {
  Tensor a({4, 5}, RandomFill{3});
  Tensor b({5, 3}, RandomFill{4});
  Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += a.at({i, k}) * b.at({k, j});
      EXPECT_NEAR(c.at({i, j}), s, 1e-14);
    }
  EXPECT_EQ(transpose(transpose(a)), a);
}

TEST(Elementwise, Binary) {
  EXPECT_EQ(add(Tensor::vector({1, 2}), Tensor::vector({3, 4})), Tensor::vector({4, 6}));
  Tensor x({3, 2}, RandomFill{5});
  EXPECT_EQ(mul(x, Tensor({3, 2}, 1.0)), x);
  const Tensor d = sub(x, x);
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(add(x, Tensor({2, 3})), ShapeError);
}

TEST(Elementwise, Unary) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(elementwise_unary(UnaryOp::Tanh, Tensor::vector({0}))[0], 0.0);
  EXPECT_EQ(elementwise_unary(UnaryOp::Relu, Tensor::vector({-1, 2})), Tensor::vector({0, 2}));
  EXPECT_THROW(elementwise_unary(UnaryOp::Log, Tensor::vector({0.0})), DomainError);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Elementwise, Reductions) {
  Tensor a = Tensor::vector({1, 2, 3});
  EXPECT_EQ(sum(a), 6.0);
  EXPECT_EQ(dot(a, a), 14.0);
  Tensor b = Tensor::vector({1, 1, 1});
  axpy(2.0, a, b);
  EXPECT_EQ(b, Tensor::vector({3, 5, 7}));
}

TEST(LogSumExp, StableAndNegInf) {
  const double big[] = {1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(big), 1000.0 + std::log(2.0), 1e-12);
  const double ninf = -std::numeric_limits<double>::infinity();
  const double none[] = {ninf, ninf};
  EXPECT_EQ(log_sum_exp(none), ninf);
  EXPECT_EQ(log_add(ninf, 0.5), 0.5);
}

TEST(Softmax, UniformRow) {
  Tensor s = softmax_rows(Tensor({1, 28}, 3.0));
  for (double v : s.values()) EXPECT_NEAR(v, 1.0 / 28.0, 1e-15);
}

TEST(Softmax, ShiftInvariance) {
  Tensor x({3, 5}, RandomFill{7, -5, 5});
  Tensor shifted = x;
  for (double& v : shifted.values()) v += 123.0;
  Tensor a = softmax_rows(x), b = softmax_rows(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(Softmax, LogFormNormalised) {
  Tensor x({4, 6}, RandomFill{8, -20, 20});
  Tensor l = softmax_rows(x, SoftmaxForm::Log);
  for (std::size_t r = 0; r < 4; ++r) EXPECT_NEAR(log_sum_exp(l.row(r)), 0.0, 1e-9);
}

TEST(Softmax, BackwardMatchesFiniteDifference) {
  for (SoftmaxForm form : {SoftmaxForm::Plain, SoftmaxForm::Log}) {
    Tensor x({3, 4}, RandomFill{9});
    Tensor w({3, 4}, RandomFill{10});
    auto f = [&](const Tensor& v) { return dot(softmax_rows(v, form), w); };
    Tensor g = softmax_rows_backward(softmax_rows(x, form), w, form);
    EXPECT_LT(finite_diff_check(f, x, g, 1e-5).max_relative_error, 1e-7);
  }
}

TEST(FiniteDiff, Quadratic) {
  auto f = [](const Tensor& x) { return x[0] * x[0]; };
  EXPECT_LT(finite_diff_check(f, Tensor::vector({3}), Tensor::vector({6})).max_relative_error, 1e-8);
}

TEST(FiniteDiff, Linear) {
  auto f = [](const Tensor& x) { return sum(x); };
  Tensor x({5}, RandomFill{11});
  EXPECT_LT(finite_diff_check(f, x, Tensor({5}, 1.0)).max_relative_error, 1e-10);
}

TEST(FiniteDiff, CtcLossAgainstCtcGrad) {
  Tensor logits({4, 3}, RandomFill{12});
  const LabelSequence target{0, 1};
  auto f = [&](const Tensor& z) { return ctc_loss(LogProbMatrix::from_logits(z), target); };
  Tensor g = ctc_grad(LogProbMatrix::from_logits(logits), target);
  EXPECT_LT(finite_diff_check(f, logits, g, 1e-5).max_relative_error, 1e-4);
}

TEST(FiniteDiff, ReportsDisagreementAndRejectsBadInput) {
  auto f = [](const Tensor& x) { return x[0] * x[0]; };
  GradReport r = finite_diff_check(f, Tensor::vector({3}), Tensor::vector({7}));
  EXPECT_GT(r.max_relative_error, 0.1);
  EXPECT_GE(r.max_relative_error, 0.0);
  EXPECT_THROW(finite_diff_check(f, Tensor::vector({3}), Tensor::vector({6}), 0.0), DomainError);
  EXPECT_THROW(finite_diff_check(f, Tensor::vector({3}), Tensor::vector({6, 1})), ShapeError);
}

TEST(DeriveSeed, DistinctStreams) {
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}
