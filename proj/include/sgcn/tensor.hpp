// Dense row-major fp64 tensors (rank 1-3) and the primitive operations the
// network is built from, each paired with its exact backward contract.
// Backward passes are hand-composed per layer in model.cpp; there is no tape.
#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace sgcn {

class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape (rank 1-3, no zero dims).
  explicit Tensor(std::vector<std::size_t> shape);

  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape) {
    return Tensor(std::move(shape));
  }
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const;
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  /// "3x4x2" style rendering for error messages.
  std::string shape_str() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// A parameter value with its accumulated loss gradient. Contributions to
/// the same parameter add.
struct GradPair {
  Tensor value;
  Tensor grad;

  GradPair() = default;
  explicit GradPair(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void accumulate(const Tensor& contribution);
  void zero_grad();
};

// ---- primitive ops ----
// None of these mutate their inputs; every result is a fresh tensor.

/// Matrix product. Accepts (m x k)·(k x n) and, for mini-batches,
/// (b x m x k)·(k x n) with the right operand broadcast over the batch.
Tensor matmul(const Tensor& a, const Tensor& b);

struct MatmulGrads {
  Tensor da;
  Tensor db;
};

/// Backward of c = a·b given dL/dc: da = dc·b^T, db = a^T·dc
/// (db sums over the batch when a is rank 3).
MatmulGrads matmul_backward(const Tensor& a, const Tensor& b, const Tensor& d_out);

/// Elementwise max(0, x).
Tensor relu(const Tensor& x);
/// Passes gradient where x > 0; at exactly 0 the subgradient is 0.
Tensor relu_backward(const Tensor& x, const Tensor& d_out);

enum class Nonlinearity { kSigmoid, kTanh };

/// Elementwise sigmoid, computed branchwise so exp never overflows.
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor nonlinearity(const Tensor& x, Nonlinearity kind);

/// Backwards are phrased in terms of the forward OUTPUT y:
/// sigmoid' = y(1-y), tanh' = 1-y^2.
Tensor sigmoid_backward(const Tensor& y, const Tensor& d_out);
Tensor tanh_backward(const Tensor& y, const Tensor& d_out);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

/// rows + bias broadcast: out(i,j) = m(i,j) + bias(j).
Tensor add_bias(const Tensor& m, const Tensor& bias);
/// Backward of the bias broadcast: column sums of d_out.
Tensor bias_backward(const Tensor& d_out);

Tensor transpose(const Tensor& m);

/// Copy of rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& m, std::size_t begin, std::size_t end);
/// Copy of columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(const Tensor& m, std::size_t begin, std::size_t end);
/// Column-wise concatenation of rank-2 tensors with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& parts);

double sum(const Tensor& x);
double mean(const Tensor& x);

/// Throws NumericError naming `context` if any entry is NaN/Inf.
void require_finite(const Tensor& x, const std::string& context);

/// Max over coordinates of |central difference - analytic| normalized by
/// max(1, |analytic|, |central difference|). `f` must be evaluable at
/// x +- step along every coordinate; non-finite evaluations throw.
double finite_difference_check(const std::function<double(const Tensor&)>& f,
                               const Tensor& x, const Tensor& analytic_grad,
                               double step);

}  // namespace sgcn
