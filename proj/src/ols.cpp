#include "epf/ols.hpp"

#include <cmath>

#include "epf/error.hpp"

namespace epf {

Matrix ols_fit(const Matrix& x, const Matrix& y, double ridge) {
  const std::size_t n = x.rows(), p = x.cols(), q = y.cols();
  if (p == 0) fail(ErrorCode::ShapeMismatch, "ols_fit: design matrix has no columns");
  if (y.rows() != n) fail(ErrorCode::ShapeMismatch, "ols_fit: X and y row counts differ");
  if (ridge < 0.0) fail(ErrorCode::RangeError, "ols_fit: ridge must be nonnegative");
  if (ridge == 0.0 && n < p)
    fail(ErrorCode::SingularDesign, "ols_fit: fewer rows than columns with ridge = 0");

  // Householder QR on the (optionally ridge-augmented) design; unlike the
  // normal equations this does not square the condition number.
  const std::size_t m = ridge > 0.0 ? n + p : n;
  Matrix a(m, p);
  Matrix b(m, q);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) a(i, j) = x(i, j);
    for (std::size_t c = 0; c < q; ++c) b(i, c) = y(i, c);
  }
  if (ridge > 0.0) {
    const double r = std::sqrt(ridge);
    for (std::size_t j = 0; j < p; ++j) a(n + j, j) = r;
  }

  double max_pivot = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    // Householder vector for column j below the diagonal
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) norm += a(i, j) * a(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) fail(ErrorCode::SingularDesign, "ols_fit: zero column in design");
    const double alpha = a(j, j) >= 0.0 ? -norm : norm;

    std::vector<double> v(m - j);
    v[0] = a(j, j) - alpha;
    for (std::size_t i = j + 1; i < m; ++i) v[i - j] = a(i, j);
    double vtv = 0.0;
    for (double t : v) vtv += t * t;

    a(j, j) = alpha;
    for (std::size_t i = j + 1; i < m; ++i) a(i, j) = 0.0;
    max_pivot = std::max(max_pivot, std::fabs(alpha));
    if (std::fabs(alpha) <= 1e-12 * std::max(max_pivot, 1.0))
      fail(ErrorCode::SingularDesign, "ols_fit: design numerically singular");
    if (vtv == 0.0) continue;

    auto reflect = [&](Matrix& mat, std::size_t cols_begin, std::size_t cols_end) {
      for (std::size_t c = cols_begin; c < cols_end; ++c) {
        double dot = 0.0;
        for (std::size_t i = j; i < m; ++i) dot += v[i - j] * mat(i, c);
        const double f = 2.0 * dot / vtv;
        for (std::size_t i = j; i < m; ++i) mat(i, c) -= f * v[i - j];
      }
    };
    reflect(a, j + 1, p);
    reflect(b, 0, q);
  }

  // back substitution on R w = Q' b
  Matrix w(p, q);
  for (std::size_t c = 0; c < q; ++c)
    for (std::size_t ii = p; ii-- > 0;) {
      double s = b(ii, c);
      for (std::size_t k = ii + 1; k < p; ++k) s -= a(ii, k) * w(k, c);
      w(ii, c) = s / a(ii, ii);
    }
  if (!w.all_finite()) fail(ErrorCode::SingularDesign, "ols_fit: non-finite solution");
  return w;
}

Matrix ols_fit_auto(const Matrix& x, const Matrix& y) {
  try {
    return ols_fit(x, y, 0.0);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularDesign) throw;
    double trace = 0.0;
    for (std::size_t i = 0; i < x.cols(); ++i)
      for (std::size_t k = 0; k < x.rows(); ++k) trace += x(k, i) * x(k, i);
    const double ridge = 1e-8 * trace / static_cast<double>(x.cols());
    return ols_fit(x, y, ridge > 0.0 ? ridge : 1e-8);
  }
}

Matrix uniform_init(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  if (scale <= 0.0) fail(ErrorCode::RangeError, "uniform_init: scale must be positive");
  Matrix m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.at_flat(k) = rng.uniform(-scale, scale);
  return m;
}

}  // namespace epf
