// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace lipread {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& dims);

/// Uniform random fill in [low, high), reproducible from `seed`.
struct RandomFill {
  std::uint64_t seed = 0;
  double low = -1.0;
  double high = 1.0;
};

/// Independent child seed for stream `salt` of a parent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

/// Dense row-major array of doubles. The last index varies fastest.
///
/// A default-constructed tensor is empty (rank 0, no elements) and only
/// serves as a placeholder; every constructor taking dims requires all
/// extents to be at least 1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, double fill = 0.0);
  Tensor(Shape dims, const RandomFill& fill);
  Tensor(Shape dims, std::vector<double> values);

  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  std::size_t flat_index(std::span<const std::size_t> index) const;
  std::size_t flat_index(std::initializer_list<std::size_t> index) const {
    return flat_index(std::span<const std::size_t>(index.begin(), index.size()));
  }
  std::vector<std::size_t> unravel(std::size_t flat) const;

  double& at(std::initializer_list<std::size_t> index) { return data_[flat_index(index)]; }
  double at(std::initializer_list<std::size_t> index) const { return data_[flat_index(index)]; }

  /// Same values, new extents; the element count must not change.
  Tensor reshaped(Shape dims) const;

  /// Row `r` of a rank-2 tensor.
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  void fill(double value);
  bool all_finite() const noexcept;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape dims_;
  std::vector<double> data_;
};

/// Row-major strides for `dims`.
Shape strides_of(const Shape& dims);
std::size_t element_count(const Shape& dims);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

enum class BinaryOp { Add, Sub, Mul };
enum class UnaryOp { Sigmoid, Tanh, Relu, Exp, Log };

Tensor elementwise_binary(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor elementwise_unary(UnaryOp op, const Tensor& a);

inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise_binary(BinaryOp::Add, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return elementwise_binary(BinaryOp::Sub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise_binary(BinaryOp::Mul, a, b); }

/// a += scale * b, shapes must match.
void axpy(double scale, const Tensor& b, Tensor& a);
Tensor scaled(const Tensor& a, double scale);
double dot(const Tensor& a, const Tensor& b);
double sum(const Tensor& a);

double sigmoid(double x) noexcept;
/// log(sum(exp(v))) with the max subtracted; returns -inf for an all -inf input.
double log_sum_exp(std::span<const double> v) noexcept;
/// Two-argument log-sum-exp that treats -inf as log(0).
double log_add(double a, double b) noexcept;

enum class SoftmaxForm { Plain, Log };

/// Row-wise softmax of a T×V matrix, stabilized by subtracting the row max.
Tensor softmax_rows(const Tensor& logits, SoftmaxForm form = SoftmaxForm::Plain);
/// Gradient w.r.t. the logits given the forward output and the upstream
/// gradient.
Tensor softmax_rows_backward(const Tensor& output, const Tensor& grad_output,
                             SoftmaxForm form = SoftmaxForm::Plain);

struct GradReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

using ScalarFunction = std::function<double(const Tensor&)>;

/// Compares `analytic` against central differences of `f` at `x`, one
/// coordinate at a time. Relative error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-8).
GradReport finite_diff_check(const ScalarFunction& f, const Tensor& x,
                             const Tensor& analytic, double eps = 1e-6);

}  // namespace lipread
