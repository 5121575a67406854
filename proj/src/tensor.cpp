#include "sgcn/tensor.hpp"

#include <cmath>
#include <sstream>

#include "sgcn/errors.hpp"

namespace sgcn {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw ValidationError("tensor rank must be 1-3, got rank " +
                          std::to_string(shape.size()));
  }
  for (std::size_t d : shape) {
    if (d == 0) throw ValidationError("tensor dimensions must be nonzero");
  }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes disagree: " +
                         a.shape_str() + " vs " + b.shape_str());
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// c[m x n] += a[m x k] . b[k x n]
void matmul_2d_into(const double* a, const double* b, double* c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      if (aip == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != shape_product(shape_)) {
    throw ValidationError("tensor data length " + std::to_string(data_.size()) +
                          " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data_) v = value;
  return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw IndexError("tensor axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank()));
  }
  return shape_[axis];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  std::ostringstream out;
  out << "(";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out << "x";
    out << shape_[i];
  }
  out << ")";
  return out.str();
}

void GradPair::accumulate(const Tensor& contribution) {
  check_same_shape(grad, contribution, "GradPair::accumulate");
  double* g = grad.data();
  const double* c = contribution.data();
  for (std::size_t i = 0; i < grad.size(); ++i) g[i] += c[i];
}

void GradPair::zero_grad() {
  for (double& v : grad.raw()) v = 0.0;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.rank() != 2) {
    throw DimensionError("matmul: right operand must be rank 2, got " +
                         b.shape_str());
  }
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  if (a.rank() == 2) {
    if (a.dim(1) != k) {
      throw DimensionError("matmul: inner dimensions disagree: " +
                           a.shape_str() + " vs " + b.shape_str());
    }
    Tensor c({a.dim(0), n});
    matmul_2d_into(a.data(), b.data(), c.data(), a.dim(0), k, n);
    require_finite(c, "matmul");
    return c;
  }
  if (a.rank() == 3) {
    if (a.dim(2) != k) {
      throw DimensionError("matmul: inner dimensions disagree: " +
                           a.shape_str() + " vs " + b.shape_str());
    }
    const std::size_t batch = a.dim(0);
    const std::size_t m = a.dim(1);
    Tensor c({batch, m, n});
    for (std::size_t s = 0; s < batch; ++s) {
      matmul_2d_into(a.data() + s * m * k, b.data(), c.data() + s * m * n, m,
                     k, n);
    }
    require_finite(c, "matmul");
    return c;
  }
  throw DimensionError("matmul: left operand must be rank 2 or 3, got " +
                       a.shape_str());
}

MatmulGrads matmul_backward(const Tensor& a, const Tensor& b,
                            const Tensor& d_out) {
  const std::size_t k = b.dim(0);
  const std::size_t n = b.dim(1);
  MatmulGrads out;
  if (a.rank() == 2) {
    if (d_out.rank() != 2 || d_out.dim(0) != a.dim(0) || d_out.dim(1) != n) {
      throw DimensionError("matmul_backward: gradient shape " +
                           d_out.shape_str() + " does not match product of " +
                           a.shape_str() + " and " + b.shape_str());
    }
    const std::size_t m = a.dim(0);
    out.da = Tensor({m, k});
    out.db = Tensor({k, n});
    // da = dC . B^T
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* drow = d_out.data() + i * n;
        const double* brow = b.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
        out.da(i, p) = acc;
      }
    }
    // db = A^T . dC
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = a.data() + i * k;
      const double* drow = d_out.data() + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = arow[p];
        if (aip == 0.0) continue;
        double* dbrow = out.db.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * drow[j];
      }
    }
    return out;
  }
  if (a.rank() == 3) {
    const std::size_t batch = a.dim(0);
    const std::size_t m = a.dim(1);
    if (d_out.rank() != 3 || d_out.dim(0) != batch || d_out.dim(1) != m ||
        d_out.dim(2) != n) {
      throw DimensionError("matmul_backward: gradient shape " +
                           d_out.shape_str() + " does not match product of " +
                           a.shape_str() + " and " + b.shape_str());
    }
    out.da = Tensor({batch, m, k});
    out.db = Tensor({k, n});
    for (std::size_t s = 0; s < batch; ++s) {
      const double* as = a.data() + s * m * k;
      const double* ds = d_out.data() + s * m * n;
      double* das = out.da.data() + s * m * k;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* drow = ds + i * n;
          const double* brow = b.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += drow[j] * brow[j];
          das[i * k + p] = acc;
        }
        const double* arow = as + i * k;
        const double* drow = ds + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = arow[p];
          if (aip == 0.0) continue;
          double* dbrow = out.db.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dbrow[j] += aip * drow[j];
        }
      }
    }
    return out;
  }
  throw DimensionError("matmul_backward: left operand must be rank 2 or 3");
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& d_out) {
  check_same_shape(x, d_out, "relu_backward");
  Tensor dx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? d_out[i] : 0.0;
  return dx;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = stable_sigmoid(x[i]);
  return y;
}

Tensor tanh(const Tensor& x) {
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

Tensor nonlinearity(const Tensor& x, Nonlinearity kind) {
  return kind == Nonlinearity::kSigmoid ? sigmoid(x) : tanh(x);
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& d_out) {
  check_same_shape(y, d_out, "sigmoid_backward");
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = d_out[i] * y[i] * (1.0 - y[i]);
  return dx;
}

Tensor tanh_backward(const Tensor& y, const Tensor& d_out) {
  check_same_shape(y, d_out, "tanh_backward");
  Tensor dx(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = d_out[i] * (1.0 - y[i] * y[i]);
  return dx;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] - b[i];
  return c;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "hadamard");
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * b[i];
  return c;
}

Tensor scale(const Tensor& a, double s) {
  Tensor c(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] * s;
  return c;
}

Tensor add_bias(const Tensor& m, const Tensor& bias) {
  if (m.rank() != 2 || bias.rank() != 1 || bias.dim(0) != m.dim(1)) {
    throw DimensionError("add_bias: cannot broadcast " + bias.shape_str() +
                         " over rows of " + m.shape_str());
  }
  Tensor out(m.shape());
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = m(i, j) + bias(j);
  }
  return out;
}

Tensor bias_backward(const Tensor& d_out) {
  if (d_out.rank() != 2) {
    throw DimensionError("bias_backward: expected rank-2 gradient, got " +
                         d_out.shape_str());
  }
  Tensor db({d_out.dim(1)});
  for (std::size_t i = 0; i < d_out.dim(0); ++i) {
    for (std::size_t j = 0; j < d_out.dim(1); ++j) db(j) += d_out(i, j);
  }
  return db;
}

Tensor transpose(const Tensor& m) {
  if (m.rank() != 2) {
    throw DimensionError("transpose: expected rank 2, got " + m.shape_str());
  }
  Tensor out({m.dim(1), m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = 0; j < m.dim(1); ++j) out(j, i) = m(i, j);
  }
  return out;
}

Tensor slice_rows(const Tensor& m, std::size_t begin, std::size_t end) {
  if (m.rank() != 2 || begin >= end || end > m.dim(0)) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " + m.shape_str());
  }
  const std::size_t cols = m.dim(1);
  Tensor out({end - begin, cols});
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i - begin, j) = m(i, j);
  }
  return out;
}

Tensor slice_cols(const Tensor& m, std::size_t begin, std::size_t end) {
  if (m.rank() != 2 || begin >= end || end > m.dim(1)) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") invalid for " + m.shape_str());
  }
  Tensor out({m.dim(0), end - begin});
  for (std::size_t i = 0; i < m.dim(0); ++i) {
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = m(i, j);
  }
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no tensors given");
  const std::size_t rows = parts.front().dim(0);
  std::size_t cols = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 2 || p.dim(0) != rows) {
      throw DimensionError("concat_cols: row counts disagree: " + p.shape_str() +
                           " vs " + parts.front().shape_str());
    }
    cols += p.dim(1);
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < p.dim(1); ++j) out(i, offset + j) = p(i, j);
    }
    offset += p.dim(1);
  }
  return out;
}

double sum(const Tensor& x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i];
  return acc;
}

double mean(const Tensor& x) { return sum(x) / static_cast<double>(x.size()); }

void require_finite(const Tensor& x, const std::string& context) {
  if (!x.all_finite()) {
    throw NumericError(context + ": non-finite value produced");
  }
}

double finite_difference_check(const std::function<double(const Tensor&)>& f,
                               const Tensor& x, const Tensor& analytic_grad,
                               double step) {
  if (step <= 0.0) throw ValidationError("finite_difference_check: step must be > 0");
  if (!x.same_shape(analytic_grad)) {
    throw DimensionError("finite_difference_check: gradient shape " +
                         analytic_grad.shape_str() + " does not match input " +
                         x.shape_str());
  }
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = f(probe);
    probe[i] = saved - step;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_difference_check: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    const double central = (up - down) / (2.0 * step);
    const double analytic = analytic_grad[i];
    const double denom =
        std::max({1.0, std::abs(analytic), std::abs(central)});
    worst = std::max(worst, std::abs(central - analytic) / denom);
  }
  return worst;
}

}  // namespace sgcn
