#include "epf/matrix.hpp"

#include <cmath>
#include <cstdio>

#include "epf/error.hpp"

namespace epf {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_)
    fail(ErrorCode::ShapeMismatch, "matrix data length does not match rows*cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorCode::ShapeMismatch, "ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
  Matrix m(rows, cols);
  m.fill(value);
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

void Matrix::fill(double v) {
  for (double& x : data_) x = v;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (!same_shape(o)) fail(ErrorCode::ShapeMismatch, "operator+= shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  if (!same_shape(o)) fail(ErrorCode::ShapeMismatch, "operator-= shape mismatch");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

Matrix& Matrix::operator*=(double c) {
  for (double& x : data_) x *= c;
  return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "matmul %zux%zu * %zux%zu", a.rows(), a.cols(), b.rows(),
                  b.cols());
    fail(ErrorCode::ShapeMismatch, buf);
  }
  Matrix c(a.rows(), b.cols());
  const std::size_t n = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.data() + i * m;
    const double* ai = a.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = ai[k];
      const double* bk = b.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) fail(ErrorCode::ShapeMismatch, "hadamard shape mismatch");
  Matrix c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c.at_flat(k) *= b.at_flat(k);
  return c;
}

double sum(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return s;
}

double sum_abs(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += std::fabs(v);
  return s;
}

double sum_squares(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(sum_squares(a)); }

bool approx_equal(const Matrix& a, const Matrix& b, double atol, double rtol) {
  if (!a.same_shape(b)) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double x = a.at_flat(k), y = b.at_flat(k);
    if (std::fabs(x - y) > atol + rtol * std::fabs(y)) return false;
  }
  return true;
}

}  // namespace epf
