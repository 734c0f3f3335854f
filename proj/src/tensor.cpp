// SPDX-License-Identifier: Apache-2.0
#include "lipread/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "lipread/error.hpp"

namespace lipread {

namespace {

void check_dims(const Shape& dims) {
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("tensor extents must be >= 1, got " + shape_to_string(dims));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.dims()) +
                     " vs " + shape_to_string(b.dims()));
  }
}

}  // namespace

std::string shape_to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) n *= d;
  return n;
}

Shape strides_of(const Shape& dims) {
  Shape strides(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) strides[k - 1] = strides[k] * dims[k];
  return strides;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor::Tensor(Shape dims, double fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(element_count(dims_), fill);
}

Tensor::Tensor(Shape dims, const RandomFill& fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  if (!(fill.low < fill.high)) throw DomainError("random fill needs low < high");
  data_.resize(element_count(dims_));
  std::mt19937_64 engine(fill.seed);
  std::uniform_real_distribution<double> dist(fill.low, fill.high);
  for (double& v : data_) v = dist(engine);
}

Tensor::Tensor(Shape dims, std::vector<double> values)
    : dims_(std::move(dims)), data_(std::move(values)) {
  check_dims(dims_);
  if (element_count(dims_) != data_.size()) {
    throw ShapeError("tensor " + shape_to_string(dims_) + " needs " +
                     std::to_string(element_count(dims_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

std::size_t Tensor::flat_index(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " for tensor " +
                     shape_to_string(dims_));
  }
  std::size_t flat = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] >= dims_[k]) throw ShapeError("index out of range on axis " + std::to_string(k));
    flat = flat * dims_[k] + index[k];
  }
  return flat;
}

std::vector<std::size_t> Tensor::unravel(std::size_t flat) const {
  if (flat >= data_.size()) throw ShapeError("flat index out of range");
  std::vector<std::size_t> index(dims_.size());
  for (std::size_t k = dims_.size(); k-- > 0;) {
    index[k] = flat % dims_[k];
    flat /= dims_[k];
  }
  return index;
}

Tensor Tensor::reshaped(Shape dims) const {
  return Tensor(std::move(dims), data_);
}

std::span<double> Tensor::row(std::size_t r) {
  if (rank() != 2 || r >= dims_[0]) throw ShapeError("row() needs a matrix and a valid row");
  return std::span<double>(data_).subspan(r * dims_[1], dims_[1]);
}

std::span<const double> Tensor::row(std::size_t r) const {
  if (rank() != 2 || r >= dims_[0]) throw ShapeError("row() needs a matrix and a valid row");
  return std::span<const double>(data_).subspan(r * dims_[1], dims_[1]);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + shape_to_string(a.dims()) + " by " +
                     shape_to_string(b.dims()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose needs a matrix");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

Tensor elementwise_binary(BinaryOp op, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "elementwise_binary");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (op) {
      case BinaryOp::Add: out[i] += b[i]; break;
      case BinaryOp::Sub: out[i] -= b[i]; break;
      case BinaryOp::Mul: out[i] *= b[i]; break;
    }
  }
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor elementwise_unary(UnaryOp op, const Tensor& a) {
  Tensor out = a;
  for (double& v : out.values()) {
    switch (op) {
      case UnaryOp::Sigmoid: v = sigmoid(v); break;
      case UnaryOp::Tanh: v = std::tanh(v); break;
      case UnaryOp::Relu: v = v > 0.0 ? v : 0.0; break;
      case UnaryOp::Exp: v = std::exp(v); break;
      case UnaryOp::Log:
        if (!(v > 0.0)) throw DomainError("log of non-positive value " + std::to_string(v));
        v = std::log(v);
        break;
    }
  }
  return out;
}

void axpy(double scale, const Tensor& b, Tensor& a) {
  require_same_shape(a, b, "axpy");
  double* ap = a.data();
  const double* bp = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) ap[i] += scale * bp[i];
}

Tensor scaled(const Tensor& a, double scale) {
  Tensor out = a;
  for (double& v : out.values()) v *= scale;
  return out;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

double log_sum_exp(std::span<const double> v) noexcept {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double log_add(double a, double b) noexcept {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

Tensor softmax_rows(const Tensor& logits, SoftmaxForm form) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows needs a T x V matrix");
  Tensor out(logits.dims());
  const std::size_t rows = logits.dim(0), cols = logits.dim(1);
  for (std::size_t t = 0; t < rows; ++t) {
    auto in = logits.row(t);
    auto o = out.row(t);
    const double m = *std::max_element(in.begin(), in.end());
    double s = 0.0;
    for (std::size_t k = 0; k < cols; ++k) s += std::exp(in[k] - m);
    if (form == SoftmaxForm::Log) {
      const double log_z = m + std::log(s);
      for (std::size_t k = 0; k < cols; ++k) o[k] = in[k] - log_z;
    } else {
      for (std::size_t k = 0; k < cols; ++k) o[k] = std::exp(in[k] - m) / s;
    }
  }
  return out;
}

Tensor softmax_rows_backward(const Tensor& output, const Tensor& grad_output, SoftmaxForm form) {
  require_same_shape(output, grad_output, "softmax_rows_backward");
  if (output.rank() != 2) throw ShapeError("softmax_rows_backward needs a T x V matrix");
  Tensor grad(output.dims());
  const std::size_t rows = output.dim(0), cols = output.dim(1);
  for (std::size_t t = 0; t < rows; ++t) {
    auto y = output.row(t);
    auto g = grad_output.row(t);
    auto d = grad.row(t);
    if (form == SoftmaxForm::Log) {
      double gsum = 0.0;
      for (double v : g) gsum += v;
      for (std::size_t k = 0; k < cols; ++k) d[k] = g[k] - std::exp(y[k]) * gsum;
    } else {
      double inner = 0.0;
      for (std::size_t k = 0; k < cols; ++k) inner += g[k] * y[k];
      for (std::size_t k = 0; k < cols; ++k) d[k] = y[k] * (g[k] - inner);
    }
  }
  return grad;
}

GradReport finite_diff_check(const ScalarFunction& f, const Tensor& x, const Tensor& analytic,
                             double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_diff_check: eps must be positive");
  require_same_shape(x, analytic, "finite_diff_check");
  GradReport report;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + eps;
    const double up = f(probe);
    probe[i] = original - eps;
    const double down = f(probe);
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("finite_diff_check: f is not finite near coordinate " +
                           std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (i == 0 || rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_index = i;
      report.analytic = a;
      report.numeric = numeric;
    }
  }
  return report;
}

}  // namespace lipread
