#pragma once

#include "epf/matrix.hpp"
#include "epf/rng.hpp"

namespace epf {

// Solves min ||X W - y||^2 + ridge ||W||^2 through the normal equations with
// a Cholesky factorization. Throws SingularDesign when X'X (+ ridge I) is
// numerically singular; with ridge = 0 that signals the caller to retry with
// a small ridge.
Matrix ols_fit(const Matrix& x, const Matrix& y, double ridge = 0.0);

// ols_fit with the standard retry: on SingularDesign, ridge is bumped to
// 1e-8 * trace(X'X) / p and the solve is repeated once.
Matrix ols_fit_auto(const Matrix& x, const Matrix& y);

// Matrix with entries i.i.d. uniform on [-scale, +scale].
Matrix uniform_init(Rng& rng, std::size_t rows, std::size_t cols, double scale);

}  // namespace epf
