#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "epf/error.hpp"
#include "epf/matrix.hpp"
#include "epf/ols.hpp"
#include "epf/rng.hpp"
#include "epf/tape.hpp"

using namespace epf;

TEST_CASE("matrix basics") {
  Matrix a{{1, 2}, {3, 4}};
  CHECK(a.rows() == 2);
  CHECK(a(1, 0) == 3);
  CHECK(a.transposed()(0, 1) == 3);
  CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), Error);
  CHECK(Matrix::identity(2) == Matrix{{1, 0}, {0, 1}});

  Matrix b = a;
  b += a;
  CHECK(b(1, 1) == 8);
}

TEST_CASE("matmul associativity on random triples") {
  Rng rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n1 = 1 + rng.uniform_int(6), n2 = 1 + rng.uniform_int(6),
                      n3 = 1 + rng.uniform_int(6), n4 = 1 + rng.uniform_int(6);
    Matrix a = uniform_init(rng, n1, n2, 1.0);
    Matrix b = uniform_init(rng, n2, n3, 1.0);
    Matrix c = uniform_init(rng, n3, n4, 1.0);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (std::size_t k = 0; k < left.size(); ++k)
      CHECK(left.at_flat(k) ==
            doctest::Approx(right.at_flat(k)).epsilon(1e-10).scale(std::fabs(left.at_flat(k)) + 1));
  }
}

TEST_CASE("ols exact interpolation") {
  const Matrix x{{1, 1}, {1, 2}};
  const Matrix y{{3}, {5}};
  const Matrix w = ols_fit(x, y, 0.0);
  CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ols identity case") {
  const Matrix w = ols_fit(Matrix::identity(3), Matrix::identity(3), 0.0);
  CHECK(approx_equal(w, Matrix::identity(3), 1e-12, 0));
}

TEST_CASE("ols singular design") {
  const Matrix x{{1, 1}, {1, 1}, {1, 1}};
  const Matrix y{{1}, {2}, {3}};
  CHECK_THROWS_AS(ols_fit(x, y, 0.0), Error);
  try {
    ols_fit(x, y, 0.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
  // the auto retry shoulders the rank deficiency with a small ridge
  const Matrix w = ols_fit_auto(x, y);
  CHECK(w.all_finite());
}

TEST_CASE("ols rejects underdetermined systems without ridge") {
  Rng rng(3);
  const Matrix x = uniform_init(rng, 2, 5, 1.0);
  const Matrix y = uniform_init(rng, 2, 1, 1.0);
  CHECK_THROWS_AS(ols_fit(x, y, 0.0), Error);
  CHECK(ols_fit(x, y, 1e-6).all_finite());
}

TEST_CASE("ols residual orthogonality") {
  Rng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t n = 20 + rng.uniform_int(30), p = 2 + rng.uniform_int(5);
    const Matrix x = uniform_init(rng, n, p, 2.0);
    const Matrix y = uniform_init(rng, n, 2, 3.0);
    const Matrix w = ols_fit(x, y, 0.0);
    Matrix resid = y;
    resid -= matmul(x, w);
    const Matrix xt_r = matmul(x.transposed(), resid);
    const Matrix xt_y = matmul(x.transposed(), y);
    CHECK(frobenius_norm(xt_r) <= 1e-8 * frobenius_norm(xt_y));
  }
}

TEST_CASE("uniform_init statistics and determinism") {
  Rng rng(123);
  const Matrix m = uniform_init(rng, 1000, 1, 0.01);
  CHECK(std::fabs(sum(m) / 1000.0) < 0.002);

  Rng a(99), b(99);
  CHECK(uniform_init(a, 4, 5, 0.3) == uniform_init(b, 4, 5, 0.3));

  Rng c(1);
  const Matrix empty = uniform_init(c, 0, 7, 1.0);
  CHECK(empty.size() == 0);
  CHECK_THROWS_AS(uniform_init(c, 2, 2, 0.0), Error);
}

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  bool any_diff = false;
  Rng a2(42);
  for (int i = 0; i < 100; ++i) any_diff |= a2.next_u64() != c.next_u64();
  CHECK(any_diff);

  Rng s0 = Rng(42).split(0), s1 = Rng(42).split(1);
  bool split_diff = false;
  for (int i = 0; i < 100; ++i) split_diff |= s0.next_u64() != s1.next_u64();
  CHECK(split_diff);

  // shuffle is a permutation
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  Rng r(5);
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("tape: square function gradient") {
  Tape tape;
  TapeValue w = tape.param(Matrix{{3.0}}, 0);
  TapeValue loss = tape.sum_sq_diff(w, Matrix{{0.0}});  // w^2
  auto grads = grad_backward(tape, loss);
  CHECK(grads.at(0)(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("tape: relu dead region") {
  Tape tape;
  TapeValue w = tape.param(Matrix{{-2.0}}, 0);
  TapeValue loss = tape.sum_sq_diff(tape.relu(w), Matrix{{1.0}});
  auto grads = grad_backward(tape, loss);
  CHECK(grads.at(0)(0, 0) == 0.0);
}

TEST_CASE("tape: empty tape yields empty map") {
  Tape tape;
  auto grads = grad_backward(tape, TapeValue{});
  CHECK(grads.empty());
}

TEST_CASE("tape: unused parameters get exact zero gradients") {
  Tape tape;
  TapeValue used = tape.param(Matrix{{2.0}}, 0);
  TapeValue unused = tape.param(Matrix{{5.0, 1.0}}, 1);
  (void)unused;
  TapeValue loss = tape.sum_sq_diff(used, Matrix{{0.0}});
  auto grads = grad_backward(tape, loss);
  CHECK(grads.at(1) == Matrix(1, 2));
  CHECK(grads.at(0)(0, 0) == doctest::Approx(4.0));
}

namespace {

// Finite-difference oracle: a from-scratch RNN loss with plain loops, kept
// independent of Matrix/matmul and of the tape.
struct OracleRnn {
  int hid, width, steps, out;
  std::vector<double> wh, wx, bh, wo, bo;  // row-major
  std::vector<double> seq;                 // steps x width
  std::vector<double> target;              // out

  double loss() const {
    std::vector<double> h(hid, 0.0), z(hid);
    for (int u = 0; u < steps; ++u) {
      for (int i = 0; i < hid; ++i) {
        double acc = bh[i];
        for (int j = 0; j < hid; ++j) acc += wh[i * hid + j] * h[j];
        for (int j = 0; j < width; ++j) acc += wx[i * width + j] * seq[u * width + j];
        z[i] = acc > 0.0 ? acc : 0.0;
      }
      h = z;
    }
    double l = 0.0;
    for (int o = 0; o < out; ++o) {
      double y = bo[o];
      for (int i = 0; i < hid; ++i) y += wo[o * hid + i] * h[i];
      const double d = y - target[o];
      l += d * d;
    }
    return l;
  }
};

std::vector<double> random_away_from_zero(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double mag = rng.uniform(lo, hi);
    x = rng.uniform() < 0.5 ? -mag : mag;
  }
  return v;
}

}  // namespace

TEST_CASE("tape gradients match central finite differences on a 3-step rnn") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(1000 + seed);
    OracleRnn o;
    o.hid = 3;
    o.width = 4;
    o.steps = 3;
    o.out = 2;
    // magnitudes bounded away from zero keep finite differences off the
    // relu kinks
    o.wh = random_away_from_zero(rng, 9, 0.1, 0.6);
    o.wx = random_away_from_zero(rng, 12, 0.1, 0.6);
    o.bh = random_away_from_zero(rng, 3, 0.1, 0.4);
    o.wo = random_away_from_zero(rng, 6, 0.1, 0.6);
    o.bo = random_away_from_zero(rng, 2, 0.1, 0.4);
    o.seq = random_away_from_zero(rng, 12, 0.2, 1.0);
    o.target = random_away_from_zero(rng, 2, 0.2, 1.0);

    // tape route
    Tape tape;
    TapeValue wh = tape.param(Matrix(3, 3, o.wh), 0);
    TapeValue wx = tape.param(Matrix(3, 4, o.wx), 1);
    TapeValue bh = tape.param(Matrix(3, 1, o.bh), 2);
    TapeValue wo = tape.param(Matrix(2, 3, o.wo), 3);
    TapeValue bo = tape.param(Matrix(2, 1, o.bo), 4);
    TapeValue h = tape.constant(Matrix(3, 1));
    for (int u = 0; u < 3; ++u) {
      Matrix x(4, 1);
      for (int j = 0; j < 4; ++j) x(j, 0) = o.seq[u * 4 + j];
      h = tape.relu(tape.add_col_broadcast(
          tape.add(tape.matmul(wh, h), tape.matmul(wx, tape.constant(x))), bh));
    }
    TapeValue pred = tape.add_col_broadcast(tape.matmul(wo, h), bo);
    TapeValue loss = tape.sum_sq_diff(pred, Matrix(2, 1, o.target));
    CHECK(tape.value(loss)(0, 0) == doctest::Approx(o.loss()).epsilon(1e-12));
    auto grads = grad_backward(tape, loss);

    // central finite differences against the oracle
    const double h_fd = 1e-5;
    std::vector<std::vector<double>*> blocks = {&o.wh, &o.wx, &o.bh, &o.wo, &o.bo};
    for (int b = 0; b < 5; ++b) {
      const Matrix& g = grads.at(b);
      for (std::size_t k = 0; k < blocks[b]->size(); ++k) {
        double& w = (*blocks[b])[k];
        const double orig = w;
        w = orig + h_fd;
        const double up = o.loss();
        w = orig - h_fd;
        const double down = o.loss();
        w = orig;
        const double fd = (up - down) / (2.0 * h_fd);
        const double an = g.at_flat(k);
        const double rel = std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-8});
        CHECK(rel < 1e-4);
      }
    }
  }
}

TEST_CASE("tape lem_rows matches finite differences") {
  Rng rng(77);
  const int n = 3, p = 4;
  Matrix coef = uniform_init(rng, 24, p + 1, 0.7);
  Matrix design = uniform_init(rng, n * 24, p, 0.9);
  Matrix target = uniform_init(rng, 24, n, 1.0);

  auto value = [&](const Matrix& c) {
    double l = 0.0;
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < 24; ++s) {
        double y = c(s, 0);
        for (int j = 0; j < p; ++j) y += c(s, j + 1) * design(i * 24 + s, j);
        const double d = y - target(s, i);
        l += d * d;
      }
    return l;
  };

  Tape tape;
  TapeValue c = tape.param(coef, 0);
  TapeValue loss = tape.sum_sq_diff(tape.lem_rows(c, design), target);
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(value(coef)).epsilon(1e-12));
  auto grads = grad_backward(tape, loss);

  const double h = 1e-6;
  for (std::size_t k = 0; k < coef.size(); ++k) {
    Matrix up = coef, down = coef;
    up.at_flat(k) += h;
    down.at_flat(k) -= h;
    const double fd = (value(up) - value(down)) / (2.0 * h);
    CHECK(grads.at(0).at_flat(k) == doctest::Approx(fd).epsilon(1e-6).scale(std::fabs(fd) + 1));
  }
}

TEST_CASE("tape l1 and scale ops") {
  Tape tape;
  TapeValue w = tape.param(Matrix{{-1.0, 2.0, 0.0}}, 0);
  TapeValue loss = tape.scale(tape.l1_norm(w), 0.5);
  CHECK(tape.value(loss)(0, 0) == doctest::Approx(1.5));
  auto grads = grad_backward(tape, loss);
  CHECK(grads.at(0)(0, 0) == doctest::Approx(-0.5));
  CHECK(grads.at(0)(0, 1) == doctest::Approx(0.5));
  CHECK(grads.at(0)(0, 2) == 0.0);  // subgradient at zero

  Tape t2;
  TapeValue lem = t2.param(Matrix{{5.0, -1.0}, {7.0, 2.0}}, 0);
  CHECK(t2.value(t2.l1_norm(lem, 1))(0, 0) == doctest::Approx(3.0));  // intercepts skipped
}
