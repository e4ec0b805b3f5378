#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "ibopt/data_io.hpp"
#include "ibopt/oracles.hpp"
#include "ibopt/problems.hpp"
#include "test_helpers.hpp"

using namespace ibopt;
using test_helpers::random_point;

TEST_CASE("quadratic synthesis basics") {
  const ProblemInstance p = quadratic_synthesize(2, 1, 2, 7);
  CHECK(p.grad_full(0, Vector::Zero(2)).norm() == 0.0);
  CHECK(p.value(Vector::Zero(2)) == 0.0);
  CHECK(p.f_star() == 0.0);
  CHECK(p.satisfies_zero_grads());
  CHECK(p.smoothness() >= p.strong_convexity());
  CHECK(p.strong_convexity() >= 0.0);

  CHECK_THROWS_AS(quadratic_synthesize(2, 1, 0, 7), std::invalid_argument);
}

TEST_CASE("shared direction is an eigenvector with eigenvalue 1") {
  const ProblemInstance p = quadratic_synthesize(30, 4, 6, 2);
  const Vector& v = p.quad_shared_direction();
  for (int i = 0; i < p.n_workers(); ++i) {
    CHECK((p.quad_matrix(i) * v - v).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("mu matches the inverse-power-iteration oracle") {
  const ProblemInstance p = quadratic_synthesize(100, 30, 20, 1);
  const double mu_oracle = inverse_power_lmin(p.quad_mean_matrix(), 1e-11);
  CHECK(std::abs(p.strong_convexity() - mu_oracle) <=
        1e-6 * std::max(1e-12, std::abs(mu_oracle)));

  // L from power iteration vs a dense solve
  double lmax = 0;
  for (int i = 0; i < p.n_workers(); ++i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(p.quad_matrix(i),
                                             Eigen::EigenvaluesOnly);
    lmax = std::max(lmax, es.eigenvalues().maxCoeff());
  }
  CHECK(p.smoothness() == doctest::Approx(lmax).epsilon(1e-8));
}

TEST_CASE("quadratic satisfies the zero-gradient assumption exactly") {
  for (double shift : {0.0, 0.5}) {
    const ProblemInstance p = quadratic_synthesize(20, 3, 8, 5, shift);
    const Vector zero = Vector::Zero(20);
    for (int i = 0; i < 3; ++i) {
      CHECK(p.grad_full(i, zero).lpNorm<Eigen::Infinity>() <=
            1e-8 * std::max(1.0, p.x_star().norm()));
    }
    // inner components average back to the worker gradient
    const Vector x = random_point(20, 33);
    for (int i = 0; i < 3; ++i) {
      Vector mean = Vector::Zero(20);
      for (int j = 0; j < p.inner_count(i); ++j) mean += p.grad_inner(i, j, x);
      mean /= p.inner_count(i);
      CHECK((mean - p.grad_full(i, x)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }
}

TEST_CASE("component shift leaves f_i intact but adds optimum noise") {
  const ProblemInstance p0 = quadratic_synthesize(16, 2, 6, 9, 0.0);
  const ProblemInstance p1 = quadratic_synthesize(16, 2, 6, 9, 0.7);
  const Vector x = random_point(16, 4);
  CHECK(p0.value(x) == p1.value(x));
  CHECK((p0.grad_full(0, x) - p1.grad_full(0, x)).norm() == 0.0);
  CHECK(minibatch_variance(p0, 0, p0.x_star(), 1) == 0.0);
  CHECK(minibatch_variance(p1, 0, p1.x_star(), 1) > 0.0);
}

TEST_CASE("single-row logistic gradient at zero") {
  SparseDataset ds;
  ds.n_rows = 1;
  ds.d = 2;
  ds.row_offsets = {0, 1};
  ds.col_index = {0};
  ds.values = {1.0};
  ds.labels = {1.0};
  // no finite minimizer at l2 = 0: skip the reference solve
  const ProblemInstance p = logreg_build(ds, 0.0, {}, 0.0);
  const Vector g = p.grad_full(0, Vector::Zero(2));
  CHECK(g[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g[1] == 0.0);
  CHECK(p.smoothness() == doctest::Approx(0.25));
}

TEST_CASE("logistic validation errors") {
  SparseDataset ds;
  ds.n_rows = 1;
  ds.d = 2;
  ds.row_offsets = {0, 2};
  ds.col_index = {0, 1};
  ds.values = {3.0, 4.0};
  ds.labels = {1.0};
  CHECK_THROWS_WITH_AS(logreg_build(ds, 0.0) /* non-unit row */,
                       doctest::Contains("not unit-normalized"),
                       std::invalid_argument);
  SparseDataset ok = normalize_rows(ds);
  ok.labels = {2.0};
  CHECK_THROWS_WITH_AS(logreg_build(ok, 0.0), doctest::Contains("label"),
                       std::invalid_argument);
}

TEST_CASE("logistic gradients match finite differences") {
  const SparseDataset ds = synth_sparse_dataset(50, 8, 13, 2, 5);
  const ProblemInstance p = logreg_build(ds, 0.00025, partition_data(ds, 2, 3));
  for (int t = 0; t < 5; ++t) {
    const Vector x = random_point(8, 100 + t);
    for (int i = 0; i < 2; ++i) {
      const Vector g = p.grad_full(i, x);
      const Vector fd = fd_gradient(p, i, x, 1e-6);
      CHECK((g - fd).norm() <= 1e-5 * std::max(1.0, g.norm()));
    }
    // single-row chain rule: sigma(b a'x) b a + l2 x
    const Vector gi = p.grad_inner(0, 0, x);
    const Vector fdi = fd_gradient_of(
        [&](const Vector& y) { return p.value_inner(0, 0, y); }, x, 1e-6);
    CHECK((gi - fdi).norm() <= 1e-5 * std::max(1.0, gi.norm()));
  }
}

TEST_CASE("oracle hierarchy: worker average equals the full gradient") {
  const ProblemInstance p = quadratic_synthesize(12, 4, 5, 21);
  const Vector x = random_point(12, 55);
  Vector mean = Vector::Zero(12);
  for (int i = 0; i < 4; ++i) mean += p.grad_full(i, x);
  mean /= 4.0;
  CHECK((mean - p.grad(x)).lpNorm<Eigen::Infinity>() < 1e-12);
  const Vector fd =
      fd_gradient_of([&](const Vector& y) { return p.value(y); }, x, 1e-6);
  CHECK((p.grad(x) - fd).norm() <= 1e-5 * std::max(1.0, fd.norm()));
}

TEST_CASE("stochastic gradient: degenerate batch equals the exact gradient") {
  const ProblemInstance p = quadratic_synthesize(10, 2, 4, 3, 0.4);
  const Vector x = random_point(10, 8);
  Rng a(5), b(5);
  StochasticGradSpec full{p.inner_count(0), 0.0};
  const Vector g = p.stochastic_grad(0, x, full, a);
  CHECK((g - p.grad_full(0, x)).norm() == 0.0);
  CHECK(a.next_u64() == b.next_u64());  // no draws consumed
}

TEST_CASE("stochastic gradient: two-row component enumerates to the mean") {
  SparseDataset ds;
  ds.n_rows = 2;
  ds.d = 3;
  ds.row_offsets = {0, 1, 2};
  ds.col_index = {0, 2};
  ds.values = {1.0, 1.0};
  ds.labels = {1.0, -1.0};
  const ProblemInstance p = logreg_build(ds, 0.001);
  const Vector x = random_point(3, 12);
  const Vector g0 = p.grad_inner(0, 0, x);
  const Vector g1 = p.grad_inner(0, 1, x);
  CHECK(((g0 + g1) / 2 - p.grad_full(0, x)).lpNorm<Eigen::Infinity>() < 1e-14);

  // batch of one: both outcomes appear, equally often
  Rng rng(4);
  StochasticGradSpec spec{1, 0.0};
  int first = 0;
  const int T = 20000;
  for (int t = 0; t < T; ++t) {
    const Vector g = p.stochastic_grad(0, x, spec, rng);
    if ((g - g0).norm() < 1e-14) {
      ++first;
    } else {
      CHECK((g - g1).norm() < 1e-14);
    }
  }
  CHECK(std::abs(first - T / 2) < 4 * std::sqrt(T * 0.25));
}

TEST_CASE("stochastic gradient is unbiased at several points") {
  const ProblemInstance p = quadratic_synthesize(6, 2, 8, 17, 0.5);
  StochasticGradSpec spec{1, 0.0};
  for (int rep = 0; rep < 3; ++rep) {
    const Vector x = random_point(6, 200 + rep);
    const Vector target = p.grad_full(0, x);
    const int T = 10000;
    Rng rng(900 + rep);
    Vector mean = Vector::Zero(6);
    Vector m2 = Vector::Zero(6);
    for (int t = 0; t < T; ++t) {
      const Vector g = p.stochastic_grad(0, x, spec, rng);
      const Vector d0 = g - mean;
      mean += d0 / (t + 1);
      m2 += d0.cwiseProduct(g - mean);
    }
    for (int c = 0; c < 6; ++c) {
      const double se = std::sqrt(std::max(m2[c], 1e-30) / (T - 1.0) / T);
      CHECK(std::abs(mean[c] - target[c]) <= 4 * se + 1e-12);
    }
  }
}

TEST_CASE("reference solve: quadratic is immediate, logistic is unique") {
  ProblemInstance q = quadratic_synthesize(8, 2, 3, 6);
  q.solve_reference(1e-12);
  CHECK(q.x_star().norm() == 0.0);
  CHECK(q.f_star() == 0.0);

  const SparseDataset ds = synth_sparse_dataset(60, 6, 8, 2, 4);
  const ProblemInstance p = logreg_build(ds, 1e-3);
  const double tol = 1e-12;
  auto [x1, f1] = solve_reference_from(p, Regularizer::none(), tol,
                                       Vector::Zero(p.dim()));
  auto [x2, f2] = solve_reference_from(p, Regularizer::none(), tol,
                                       random_point(6, 77, 2.0));
  CHECK((x1 - x2).norm() <= 10 * tol * std::max(1.0, x1.norm()));

  // f_star is a lower bound on sampled values
  for (int t = 0; t < 100; ++t) {
    CHECK(p.f_star() <= p.value(p.x_star() + random_point(6, 300 + t, 0.3)) + 1e-15);
  }
}

TEST_CASE("reference point minimizes over random perturbations") {
  const ProblemInstance q = quadratic_synthesize(10, 3, 4, 19);
  const SparseDataset ds = synth_sparse_dataset(40, 7, 23, 2, 5);
  const ProblemInstance lg = logreg_build(ds, 1e-3);
  for (int t = 0; t < 1000; ++t) {
    const Vector dq = random_point(10, 4000 + t, 0.1);
    CHECK(q.value(q.x_star()) <= q.value(q.x_star() + dq) + 1e-15);
    const Vector dl = random_point(7, 8000 + t, 0.1);
    CHECK(lg.value(lg.x_star()) <= lg.value(lg.x_star() + dl) + 1e-15);
  }
}

TEST_CASE("index validation") {
  const ProblemInstance p = quadratic_synthesize(6, 2, 3, 4);
  const Vector x = Vector::Zero(6);
  CHECK_THROWS_AS(p.grad_full(2, x), std::out_of_range);
  CHECK_THROWS_AS(p.grad_inner(0, 3, x), std::out_of_range);
  CHECK_THROWS_AS(p.grad_global(6, x), std::out_of_range);
}

TEST_CASE("stochastic gradient rejects oversized batches") {
  const ProblemInstance p = quadratic_synthesize(6, 1, 4, 3);
  Rng rng(1);
  StochasticGradSpec too_big{5, 0.0};
  CHECK_THROWS_AS(p.stochastic_grad(0, Vector::Zero(6), too_big, rng),
                  std::invalid_argument);
}
