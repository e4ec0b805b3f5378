#include <doctest.h>

#include <cmath>

#include "ibopt/oracles.hpp"
#include "ibopt/problems.hpp"
#include "ibopt/prox.hpp"
#include "test_helpers.hpp"

using namespace ibopt;

namespace {

// Scalar minimization of r(y) + (y - x)^2 / (2 gamma): bisection on the
// central-difference slope of the convex objective, with y = 0 tried
// separately since r may be kinked there.
double scalar_prox_oracle(double x, double gamma,
                          const std::function<double(double)>& r) {
  auto obj = [&](double y) { return r(y) + (y - x) * (y - x) / (2 * gamma); };
  const double h = 1e-7;
  auto slope = [&](double y) { return (obj(y + h) - obj(y - h)) / (2 * h); };
  double lo = x - 10.0 * (1.0 + std::abs(x)), hi = x + 10.0 * (1.0 + std::abs(x));
  for (int it = 0; it < 200; ++it) {
    const double mid = (lo + hi) / 2;
    if (slope(mid) > 0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const double root = (lo + hi) / 2;
  return obj(0.0) <= obj(root) ? 0.0 : root;
}

}  // namespace

TEST_CASE("prox closed forms") {
  Vector x(3);
  x << 2.0, -0.5, 0.0;

  CHECK((prox_apply(Regularizer::none(), 0.7, x) - x).norm() == 0.0);

  const Regularizer l1 = Regularizer::l1(2.0);  // gamma*lambda = 1
  const Vector y = prox_apply(l1, 0.5, x);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 0.0);

  const Regularizer sq = Regularizer::squared_l2(3.0);
  const Vector z = prox_apply(sq, 0.5, x);
  CHECK((z - x / 2.5).norm() == doctest::Approx(0.0));

  CHECK_THROWS_AS(prox_apply(l1, 0.0, x), std::invalid_argument);
  CHECK_THROWS_AS(Regularizer::l1(-1.0), std::invalid_argument);
}

TEST_CASE("l1 prox matches scalar minimization oracle") {
  const Vector x = test_helpers::random_point(12, 31);
  // gamma*lambda = 0.3; small gamma keeps the value-based scalar search
  // sharp enough to resolve the minimizer to 1e-8
  const double gamma = 0.05, lambda = 6.0;
  const Vector y = prox_apply(Regularizer::l1(lambda), gamma, x);
  for (int c = 0; c < x.size(); ++c) {
    const double ref =
        scalar_prox_oracle(x[c], gamma, [&](double v) { return lambda * std::abs(v); });
    CHECK(std::abs(y[c] - ref) < 1e-8);
  }
}

TEST_CASE("non-expansiveness over random pairs") {
  const Regularizer regs[] = {Regularizer::none(), Regularizer::l1(0.4),
                              Regularizer::squared_l2(1.3)};
  for (const auto& reg : regs) {
    for (int trial = 0; trial < 1000; ++trial) {
      const Vector x = test_helpers::random_point(8, 1000 + trial, 2.0);
      const Vector y = test_helpers::random_point(8, 5000 + trial, 2.0);
      const double lhs = (prox_apply(reg, 0.9, x) - prox_apply(reg, 0.9, y)).norm();
      CHECK(lhs <= (x - y).norm() * (1 + 1e-12));
    }
  }
}

TEST_CASE("reference solution is a prox fixed point") {
  const SparseDataset ds = synth_sparse_dataset(80, 10, 3, 3, 7);
  const ProblemInstance p = logreg_build(ds, 1e-3);
  const Regularizer reg = Regularizer::l1(1e-3);
  const double tol = 1e-12;
  auto [xr, fr] = solve_reference_from(p, reg, tol, Vector::Zero(p.dim()));
  const double gamma = 1.0 / p.smoothness();
  const Vector fixed = prox_apply(reg, gamma, xr - gamma * p.grad(xr));
  CHECK((fixed - xr).norm() <= 10 * tol * std::max(1.0, xr.norm()));
}
