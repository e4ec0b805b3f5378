#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "ibopt/oracles.hpp"
#include "ibopt/simulator.hpp"
#include "test_helpers.hpp"

using namespace ibopt;
using test_helpers::random_point;

TEST_CASE("finite differences: exact on linear, tight on quadratic and logistic") {
  const Vector c = random_point(6, 2);
  const Vector x = random_point(6, 3);
  const Vector g =
      fd_gradient_of([&](const Vector& y) { return c.dot(y); }, x, 1e-6);
  CHECK((g - c).lpNorm<Eigen::Infinity>() < 1e-9);

  const ProblemInstance q = quadratic_synthesize(8, 2, 4, 5);
  const Vector xp = random_point(8, 7);
  CHECK((fd_gradient(q, 1, xp, 1e-6) - q.grad_full(1, xp)).norm() <
        1e-7 * std::max(1.0, q.grad_full(1, xp).norm()));

  const SparseDataset ds = synth_sparse_dataset(40, 6, 9, 2, 4);
  const ProblemInstance lg = logreg_build(ds, 1e-3);
  const Vector xl = random_point(6, 11);
  CHECK((fd_gradient(lg, 0, xl, 1e-6) - lg.grad_full(0, xl)).norm() <=
        1e-5 * std::max(1.0, lg.grad_full(0, xl).norm()));
}

TEST_CASE("moment oracle: degenerate and two-outcome cases") {
  const ProblemInstance p = quadratic_synthesize(6, 1, 4, 13);
  const Vector x = random_point(6, 17);
  const double gamma = 0.4;

  const BlockPartition full = partition_uniform(6, 2);
  const MomentResult all = moment_oracle(p, x, full, 1.0, 1, gamma);
  CHECK(all.variance == 0.0);
  CHECK((all.mean - (x - gamma * p.grad(x))).lpNorm<Eigen::Infinity>() < 1e-14);

  // m=2, tau m=1: two equiprobable outcomes
  const MomentResult half = moment_oracle(p, x, full, 0.5, 1, gamma);
  const double expect =
      gamma * gamma * 0.5 * 0.5 * p.grad_full(0, x).squaredNorm();
  CHECK(half.variance == doctest::Approx(expect).epsilon(1e-12));
  CHECK(half.n_outcomes == 2.0);
}

TEST_CASE("moment oracle matches closed forms for a joint two-worker case") {
  const ProblemInstance p = quadratic_synthesize(8, 2, 4, 19);
  const Vector x = random_point(8, 23);
  const BlockPartition part = partition_uniform(8, 4);
  const double gamma = 0.7;
  const MomentResult mo = moment_oracle(p, x, part, 0.5, 2, gamma);
  CHECK(mo.n_outcomes == 36.0);
  CHECK((mo.mean - mean_step_closed_form(p, x, 0.5, gamma))
            .lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(mo.variance ==
        doctest::Approx(variance_closed_form(p, x, 0.5, gamma, 2)).epsilon(1e-12));
}

TEST_CASE("moment oracle falls back to Monte-Carlo past the enumeration guard") {
  const ProblemInstance p = quadratic_synthesize(30, 2, 4, 29);
  const BlockPartition part = partition_uniform(30, 30);
  const Vector x = random_point(30, 31);
  // C(30,15)^2 is astronomically past the guard
  const MomentResult mo = moment_oracle(p, x, part, 0.5, 2, 0.2, 7, 20000);
  CHECK(mo.n_outcomes == 0.0);
  const double closed = variance_closed_form(p, x, 0.5, 0.2, 2);
  CHECK(mo.variance == doctest::Approx(closed).epsilon(0.1));
}

TEST_CASE("theoretical_rate formulas and rejections") {
  const ProblemInstance p = quadratic_synthesize(20, 4, 8, 37);
  const double L = p.smoothness(), mu = p.strong_convexity();

  const RateBundle gd = theoretical_rate(MethodKind::gd, p, 1, 1.0, 1.0 / (2 * L));
  CHECK(gd.factor == doctest::Approx(1 - mu / (2 * L)).epsilon(1e-14));

  const double g = stepsize_default(MethodKind::ibcd, p, 4, 0.25).gamma;
  const RateBundle rb = theoretical_rate(MethodKind::ibcd, p, 4, 0.25, g);
  CHECK(rb.factor ==
        doctest::Approx(1 - mu / (2 * L) * (0.25 * 4) / (0.25 * 4 + 2 * 0.75))
            .epsilon(1e-12));
  CHECK_THROWS_AS(theoretical_rate(MethodKind::ibcd, p, 4, 0.25, g * 1.01),
                  std::invalid_argument);
  CHECK_THROWS_AS(theoretical_rate(MethodKind::cd_shared, p, 4, 0.25, g),
                  std::invalid_argument);

  const double gs = stepsize_default(MethodKind::isaga_distributed, p, 4, 0.25).gamma;
  const RateBundle rd = theoretical_rate(MethodKind::isaga_distributed, p, 4, 0.25, gs);
  CHECK(rd.c > 0);
  const int l = p.inner_count(0);
  CHECK(rd.theta ==
        doctest::Approx(0.25 * std::min(gs * mu, 1.0 / l - 2.0 / (16.0 * l * rd.c)))
            .epsilon(1e-12));
}

TEST_CASE("lyapunov values: zero at optimum, dominated by the distance term") {
  const ProblemInstance p = quadratic_synthesize(10, 2, 4, 41, 0.3);
  const double gamma = stepsize_default(MethodKind::isaga_shared, p, 2, 0.5).gamma;
  const RateBundle rb = theoretical_rate(MethodKind::isaga_shared, p, 2, 0.5, gamma);
  std::vector<Vector> opt_alpha;
  for (int j = 0; j < p.global_count(); ++j) {
    opt_alpha.push_back(p.grad_global(j, p.x_star()));
  }
  CHECK(lyapunov_saga_shared(p.x_star(), opt_alpha, p, rb.c, gamma) == 0.0);

  const Vector x = random_point(10, 43);
  std::vector<Vector> zero_alpha(p.global_count(), Vector::Zero(10));
  const double ly = lyapunov_saga_shared(x, zero_alpha, p, rb.c, gamma);
  CHECK(ly >= (x - p.x_star()).squaredNorm());
  CHECK_THROWS_AS(lyapunov_saga_shared(x, zero_alpha, p, -0.1, gamma),
                  std::invalid_argument);
}

TEST_CASE("seed-averaged lyapunov obeys the distributed SAGA envelope") {
  const ProblemInstance p = quadratic_synthesize(16, 4, 8, 47, 0.3);
  MethodConfig cfg;
  cfg.kind = MethodKind::isaga_distributed;
  cfg.n_workers = 4;
  cfg.m_blocks = 4;
  cfg.tau = 0.25;
  cfg.step = stepsize_default(MethodKind::isaga_distributed, p, 4, 0.25);
  // strictly inside the stepsize bound so theta > 0 on both branches
  cfg.step.gamma *= 0.8;
  cfg.record_lyapunov = true;
  const RateBundle rb =
      theoretical_rate(MethodKind::isaga_distributed, p, 4, 0.25, cfg.step.gamma);
  REQUIRE(rb.theta > 0);

  const Vector x0 = random_point(16, 51);
  const MeanTrace mt = monte_carlo(p, cfg, x0, 400, 100, 53);
  REQUIRE(!mt.lyapunov_mean.empty());
  const double l0 = mt.lyapunov_mean.front();
  for (std::size_t i = 0; i < mt.size(); ++i) {
    const double env = std::pow(1 - rb.theta, static_cast<double>(mt.rounds[i])) * l0;
    CHECK(mt.lyapunov_mean[i] <= env * 1.1);
  }
  // distance is non-increasing in expectation once warmup has passed
  for (std::size_t i = 6; i < mt.size(); ++i) {
    CHECK(mt.dist_mean[i] <= mt.dist_mean[i - 1] * (1 + 1e-9) + 4 * mt.dist_se[i]);
  }
}

TEST_CASE("empirical rate fit: geometric, constant, and spectral reference") {
  std::vector<std::int64_t> rounds;
  std::vector<double> geo, flat;
  double v = 3.0;
  for (int t = 0; t <= 50; ++t) {
    rounds.push_back(t);
    geo.push_back(v);
    flat.push_back(2.5);
    v *= 0.9;
  }
  CHECK(empirical_rate_fit(rounds, geo, 0, 50) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(empirical_rate_fit(rounds, flat, 0, 50) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(log_linear_r2(rounds, geo, 0, 50) == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> with_zero = geo;
  with_zero[20] = 0.0;
  CHECK_THROWS_AS(empirical_rate_fit(rounds, with_zero, 0, 50), std::invalid_argument);

  // gd with gamma = 1/L against the spectral contraction of the mean matrix
  const ProblemInstance p = quadratic_synthesize(20, 3, 12, 59);
  MethodConfig cfg;
  cfg.kind = MethodKind::gd;
  cfg.n_workers = 3;
  cfg.m_blocks = 4;
  cfg.step = StepsizeSchedule::constant(1.0 / p.smoothness());
  const Trace tr = run_synchronous(p, cfg, random_point(20, 61), 4000, 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.quad_mean_matrix(),
                                           Eigen::EigenvaluesOnly);
  double worst = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double f = 1 - es.eigenvalues()[i] / p.smoothness();
    worst = std::max(worst, f * f);
  }
  std::vector<std::int64_t> rr;
  std::vector<double> vv;
  for (const auto& r : tr.records) {
    if (r.dist_sq > 1e-20 && r.dist_sq < 1e-2) {
      rr.push_back(r.round);
      vv.push_back(r.dist_sq);
    }
  }
  const double fitted = empirical_rate_fit(rr, vv, rr.front(), rr.back());
  CHECK(fitted == doctest::Approx(worst).epsilon(0.02));
}

TEST_CASE("log-log slope recovers a 1/t decay") {
  std::vector<std::int64_t> rounds;
  std::vector<double> vals;
  for (int t = 1; t <= 2000; t *= 2) {
    rounds.push_back(t);
    vals.push_back(5.0 / t);
  }
  CHECK(loglog_slope_fit(rounds, vals, 1, 2000) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("measured strong growth bounds the aggregate estimator") {
  const ProblemInstance p = quadratic_synthesize(10, 3, 5, 67);
  std::vector<Vector> pts;
  for (int t = 0; t < 10; ++t) pts.push_back(random_point(10, 400 + t, 2.0));
  const MeasuredGrowth mg = measure_strong_growth(p, pts, 0);
  CHECK(mg.rho_tilde >= 1.0);
  CHECK(mg.sigma_tilde_sq <= 1e-20);  // zero gradients at the optimum

  auto [rho_hat, sig_hat] =
      strong_growth_params(mg.rho_tilde, mg.sigma_tilde_sq, mg.rho_bar,
                           mg.sigma_bar_sq, 3, 0.5);
  const BlockPartition part = partition_uniform(10, 4);
  Rng rng(71);
  for (const auto& x : pts) {
    double acc = 0;
    const int T = 4000;
    std::vector<Vector> grads;
    for (int i = 0; i < 3; ++i) grads.push_back(p.grad_full(i, x));
    std::vector<double> samples;
    samples.reserve(T);
    for (int t = 0; t < T; ++t) {
      Vector q = Vector::Zero(10);
      for (int i = 0; i < 3; ++i) {
        masked_axpy(q, 1.0, grads[i], sample_subset(part, 0.5, rng));
      }
      q /= 3 * 0.5;
      samples.push_back(q.squaredNorm());
      acc += samples.back();
    }
    const double mean = acc / T;
    double var = 0;
    for (double s : samples) var += (s - mean) * (s - mean);
    const double se = std::sqrt(var / (T - 1.0) / T);
    CHECK(mean <= rho_hat * p.grad(x).squaredNorm() + sig_hat + 4 * se);
  }
}

TEST_CASE("nu measurement is a max over sampled points") {
  const ProblemInstance p = quadratic_synthesize(8, 3, 4, 73);
  std::vector<Vector> pts = {random_point(8, 80), random_point(8, 81, 3.0)};
  const double nu_sq = measure_grad_dissimilarity_sq(p, pts);
  double check = 0;
  for (const auto& x : pts) {
    double s = 0;
    for (int i = 0; i < 3; ++i) s += (p.grad(x) - p.grad_full(i, x)).squaredNorm();
    check = std::max(check, s / 3);
  }
  CHECK(nu_sq == doctest::Approx(check));
}

TEST_CASE("worker strong convexity is positive for tall inner dimension") {
  const ProblemInstance p = quadratic_synthesize(12, 3, 24, 79);
  const double mu_w = worker_strong_convexity(p);
  CHECK(mu_w > 0);
  CHECK(mu_w <= p.strong_convexity() * (1 + 1e-9));
}
