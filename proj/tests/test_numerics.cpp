#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gansearch/adam.hpp"
#include "gansearch/errors.hpp"
#include "gansearch/grad_check.hpp"
#include "gansearch/layers.hpp"
#include "gansearch/matrix.hpp"
#include "gansearch/rng.hpp"

using namespace gansearch;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Scalar probe: L = sum(out ⊙ probe).
double probe_dot(const Matrix& out, const Matrix& probe) { return sum(hadamard(out, probe)); }

}  // namespace

TEST_CASE("rng is deterministic and splits into independent streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  Rng s1 = Rng(42).split(1), s2 = Rng(42).split(2);
  CHECK(s1() != s2());
  Rng u(3);
  double total = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    total += v;
  }
  CHECK(total / 100000 == doctest::Approx(0.5).epsilon(0.01));
  Rng n(4);
  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double v = n.normal();
    m1 += v;
    m2 += v * v;
  }
  CHECK(std::abs(m1 / 100000) < 0.02);
  CHECK(m2 / 100000 == doctest::Approx(1.0).epsilon(0.02));
  Rng k(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[k.uniform_index(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("matrix products agree with hand arithmetic") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5, 6}, {7, 8}});
  CHECK(matmul(a, b) == Matrix::from_rows({{19, 22}, {43, 50}}));
  CHECK(matmul_nt(a, b) == Matrix::from_rows({{17, 23}, {39, 53}}));
  CHECK(matmul_tn(a, b) == Matrix::from_rows({{26, 30}, {38, 44}}));
  CHECK(transpose(a) == Matrix::from_rows({{1, 3}, {2, 4}}));
  CHECK(column_sum(a) == Matrix::from_rows({{4, 6}}));
  CHECK(concat_cols(a, b) == Matrix::from_rows({{1, 2, 5, 6}, {3, 4, 7, 8}}));
  CHECK(slice_cols(concat_cols(a, b), 2, 4) == b);
  CHECK_THROWS_AS(matmul(a, Matrix(3, 2)), DimensionError);
  CHECK_THROWS_AS(add(a, Matrix(2, 3)), DimensionError);
}

TEST_CASE("affine_forward examples") {
  CHECK(affine_forward(Matrix::identity(2), Matrix(1, 2), Matrix::from_rows({{2, 3}})) ==
        Matrix::from_rows({{2, 3}}));
  CHECK(affine_forward(Matrix::from_rows({{1, 2}, {3, 4}}), Matrix::from_rows({{1, 1}}),
                       Matrix::from_rows({{1, 1}})) == Matrix::from_rows({{4, 8}}));
  Rng rng(1);
  CHECK(affine_forward(Matrix(3, 5), Matrix(1, 3, 7.0), random_matrix(1, 5, rng)) ==
        Matrix::from_rows({{7, 7, 7}}));
  try {
    affine_forward(Matrix(3, 5), Matrix(1, 3), Matrix(2, 4));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("3x5") != std::string::npos);
    CHECK(msg.find("2x4") != std::string::npos);
  }
}

TEST_CASE("affine_forward is linear in x") {
  Rng rng(2);
  const Matrix w = random_matrix(4, 6, rng);
  const Matrix b = random_matrix(1, 4, rng);
  const Matrix x1 = random_matrix(5, 6, rng);
  const Matrix x2 = random_matrix(5, 6, rng);
  const Matrix lhs = affine_forward(w, b, add(x1, x2));
  Matrix rhs = add(affine_forward(w, b, x1), affine_forward(w, b, x2));
  const Matrix bias_rows = affine_forward(Matrix(4, 6), b, Matrix(5, 6));
  rhs = subtract(rhs, bias_rows);
  CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("affine_backward examples") {
  Rng rng(3);
  const Matrix w = random_matrix(3, 4, rng);
  const Matrix x = random_matrix(2, 4, rng);
  const auto zero = affine_backward(w, x, Matrix(2, 3));
  CHECK(sum(hadamard(zero.weight, zero.weight)) == 0.0);
  CHECK(sum(hadamard(zero.bias, zero.bias)) == 0.0);
  CHECK(sum(hadamard(zero.input, zero.input)) == 0.0);
  const Matrix g = random_matrix(1, 3, rng);
  CHECK(affine_backward(Matrix::identity(3), random_matrix(1, 3, rng), g).input == g);
  CHECK_THROWS_AS(affine_backward(w, x, Matrix(2, 2)), DimensionError);
}

TEST_CASE("activation definitions") {
  const Matrix x = Matrix::from_rows({{-5, -1, 3}});
  CHECK(activate(x, Activation::kRelu) == Matrix::from_rows({{0, 0, 3}}));
  const Matrix leaky = activate(x, Activation::kLeakyRelu, 0.2);
  CHECK(leaky(0, 1) == doctest::Approx(-0.2));
  CHECK(leaky(0, 2) == 3.0);
}

TEST_CASE("dropout examples") {
  Rng rng(4);
  const Matrix x = random_matrix(20, 30, rng);
  for (double rate : {0.0, 0.3, 0.9}) {
    const auto eval = dropout(x, rate, rng, false);
    CHECK(eval.output == x);
    CHECK(eval.mask == Matrix(20, 30, 1.0));
  }
  CHECK(dropout(x, 0.0, rng, true).output == x);
  CHECK_THROWS_AS(dropout(x, 1.0, rng, true), ParameterError);
  CHECK_THROWS_AS(dropout(x, -0.1, rng, true), ParameterError);

  const Matrix ones(100, 1000, 1.0);
  const auto r = dropout(ones, 0.5, rng, true);
  std::size_t kept = 0;
  for (double v : r.mask.values()) kept += v != 0.0;
  CHECK(static_cast<double>(kept) / 1e5 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(mean(r.output) - 1.0) < 0.02);
}

TEST_CASE("adam examples") {
  OptimHyper h;
  Matrix p = Matrix::from_rows({{1.5, -2.0}});
  AdamState s = AdamState::zeros_like(p);
  const Matrix before = p;
  for (int i = 0; i < 10; ++i) adam_step(p, Matrix(1, 2), s, h);
  CHECK(p == before);
  CHECK(s.step_count == 10);

  h.learning_rate = 0.1;
  Matrix q(1, 1, 1.0);
  AdamState sq = AdamState::zeros_like(q);
  adam_step(q, Matrix(1, 1, 1.0), sq, h);
  CHECK(q(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(sq.step_count == 1);

  h.learning_rate = 0.05;
  Matrix r(1, 1, 1.0);
  AdamState sr = AdamState::zeros_like(r);
  for (int i = 0; i < 100; ++i) adam_step(r, Matrix(1, 1, 2.0 * r(0, 0)), sr, h);
  CHECK(std::abs(r(0, 0)) < 0.1);

  CHECK_THROWS_AS(adam_step(r, Matrix(2, 1), sr, h), DimensionError);
  OptimHyper bad;
  bad.beta1 = 0.9999;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = OptimHyper{};
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("grad_check examples") {
  Rng rng(5);
  const Matrix a = random_matrix(3, 4, rng);
  const ScalarFunction linear = [&](const Matrix& x, Matrix* grad) {
    if (grad) *grad = a;
    return sum(hadamard(a, x));
  };
  CHECK(grad_check(linear, random_matrix(3, 4, rng)) < 1e-8);

  const ScalarFunction bad = [](const Matrix& x, Matrix* grad) {
    if (grad) *grad = Matrix(x.rows(), x.cols());
    return std::nan("");
  };
  CHECK_THROWS_AS(grad_check(bad, Matrix(1, 1)), NumericError);
}

TEST_CASE("every layer kind passes the finite-difference check at 100 random points") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix w = random_matrix(3, 4, rng, 0.7);
    const Matrix b = random_matrix(1, 3, rng, 0.1);
    const Matrix x = random_matrix(2, 4, rng);
    const Matrix probe = random_matrix(2, 3, rng);

    const ScalarFunction by_x = [&](const Matrix& xx, Matrix* grad) {
      const Matrix out = affine_forward(w, b, xx);
      if (grad) *grad = affine_backward(w, xx, probe).input;
      return probe_dot(out, probe);
    };
    const ScalarFunction by_w = [&](const Matrix& ww, Matrix* grad) {
      const Matrix out = affine_forward(ww, b, x);
      if (grad) *grad = affine_backward(ww, x, probe).weight;
      return probe_dot(out, probe);
    };
    const ScalarFunction by_b = [&](const Matrix& bb, Matrix* grad) {
      const Matrix out = affine_forward(w, bb, x);
      if (grad) *grad = affine_backward(w, x, probe).bias;
      return probe_dot(out, probe);
    };
    REQUIRE(grad_check(by_x, x) < 1e-4);
    REQUIRE(grad_check(by_w, w) < 1e-4);
    REQUIRE(grad_check(by_b, b) < 1e-4);

    for (Activation kind : {Activation::kRelu, Activation::kLeakyRelu}) {
      const Matrix pre = random_matrix(2, 3, rng);
      const ScalarFunction act = [&](const Matrix& p, Matrix* grad) {
        if (grad) *grad = activate_backward(p, probe, kind, 0.2);
        return probe_dot(activate(p, kind, 0.2), probe);
      };
      REQUIRE(grad_check(act, pre) < 1e-4);

      const ScalarFunction fc_act = [&](const Matrix& xx, Matrix* grad) {
        const Matrix p = affine_forward(w, b, xx);
        if (grad) *grad = affine_backward(w, xx, activate_backward(p, probe, kind, 0.2)).input;
        return probe_dot(activate(p, kind, 0.2), probe);
      };
      REQUIRE(grad_check(fc_act, x) < 1e-4);
    }

    Rng mask_rng(100 + trial);
    const Matrix mask = dropout(Matrix(2, 3, 1.0), 0.5, mask_rng, true).mask;
    const ScalarFunction drop = [&](const Matrix& p, Matrix* grad) {
      if (grad) *grad = dropout_backward(mask, probe);
      return probe_dot(hadamard(p, mask), probe);
    };
    REQUIRE(grad_check(drop, random_matrix(2, 3, rng)) < 1e-4);
  }
}

TEST_CASE("operations are deterministic given the seed") {
  Rng r1(9), r2(9);
  const Matrix x = random_matrix(4, 4, r1);
  const Matrix y = random_matrix(4, 4, r2);
  CHECK(x == y);
  CHECK(dropout(x, 0.5, r1, true).mask == dropout(y, 0.5, r2, true).mask);
}
