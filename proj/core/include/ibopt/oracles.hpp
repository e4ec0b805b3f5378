#pragma once

#include <functional>

#include "ibopt/blocks.hpp"
#include "ibopt/methods.hpp"
#include "ibopt/problems.hpp"
#include "ibopt/trace.hpp"

namespace ibopt {

// Central finite differences, one evaluation pair per coordinate.
Vector fd_gradient_of(const std::function<double(const Vector&)>& f,
                      const Vector& x, double h);
Vector fd_gradient(const ProblemInstance& p, int i, const Vector& x,
                   double h = 1e-6);

struct MomentResult {
  Vector mean;       // E[x^{t+1}]
  double variance;   // E ||x^{t+1} - E x^{t+1}||^2
  double n_outcomes; // joint outcomes enumerated (0 for Monte-Carlo fallback)
};

// Exact expectation and variance of the aggregated zero-noise block-gradient
// update by enumerating all joint subset outcomes; falls back to Monte-Carlo
// when C(m, tau m)^n exceeds 1e6.
MomentResult moment_oracle(const ProblemInstance& p, const Vector& x,
                           const BlockPartition& part, double tau, int n,
                           double gamma, std::uint64_t mc_seed = 1,
                           int mc_draws = 100000);

// Closed forms from the first/second-moment identities (zero-noise case).
Vector mean_step_closed_form(const ProblemInstance& p, const Vector& x,
                             double tau, double gamma);
double variance_closed_form(const ProblemInstance& p, const Vector& x,
                            double tau, double gamma, int n);

// Contraction constants the convergence theorems prescribe.
struct RateBundle {
  MethodKind kind = MethodKind::ibcd;
  double factor = 1.0;  // per-round (per-epoch for async) contraction of E||x-x*||^2
  double theta = 0.0;   // SAGA rate
  double c = 0.0;       // SAGA Lyapunov weight
  double gamma = 0.0;
};

RateBundle theoretical_rate(MethodKind kind, const ProblemInstance& p, int n,
                            double tau, double gamma);

// L = ||x - x*||^2 + c gamma^2 sum ||alpha - grad(x*)||^2.
double lyapunov_saga_shared(const Vector& x, const std::vector<Vector>& alpha,
                            const ProblemInstance& p, double c, double gamma);
double lyapunov_saga_distributed(const Vector& x,
                                 const std::vector<std::vector<Vector>>& alpha,
                                 const ProblemInstance& p, double c,
                                 double gamma);

enum class TraceMetric { subopt, dist_sq, grad_sq, lyapunov, subopt_wavg };

// Least-squares slope of log(metric) vs round over records with
// t0 <= round <= t1, exponentiated into a per-round factor.
double empirical_rate_fit(const Trace& trace, TraceMetric metric,
                          std::int64_t t0, std::int64_t t1);
double empirical_rate_fit(const std::vector<std::int64_t>& rounds,
                          const std::vector<double>& values, std::int64_t t0,
                          std::int64_t t1);

// Log-log slope (for O(1/t) decay checks).
double loglog_slope_fit(const std::vector<std::int64_t>& rounds,
                        const std::vector<double>& values, std::int64_t t0,
                        std::int64_t t1);

// Ordinary R^2 of the log-linear fit used by empirical_rate_fit.
double log_linear_r2(const std::vector<std::int64_t>& rounds,
                     const std::vector<double>& values, std::int64_t t0,
                     std::int64_t t1);

// Empirically measured strong-growth constants over a set of sample points.
struct MeasuredGrowth {
  double rho_tilde = 1.0;
  double sigma_tilde_sq = 0.0;
  double rho_bar = 0.0;
  double sigma_bar_sq = 0.0;
};
MeasuredGrowth measure_strong_growth(const ProblemInstance& p,
                                     const std::vector<Vector>& points,
                                     int batch_size);

// Exact variance of the batch-mean stochastic gradient of worker i at x.
double minibatch_variance(const ProblemInstance& p, int i, const Vector& x,
                          int batch_size);

// Gradient-dissimilarity bound: max over points of (1/n) sum ||grad f - grad f_i||^2.
double measure_grad_dissimilarity_sq(const ProblemInstance& p,
                                     const std::vector<Vector>& points);

// Smallest eigenvalue of the mean quadratic matrix via inverse power
// iteration; an independent cross-check of the stored strong convexity.
double inverse_power_lmin(const Matrix& A, double rel_tol = 1e-9,
                          int max_iters = 100000);

// min_i lmin(M_i): per-worker strong convexity (quadratic problems).
double worker_strong_convexity(const ProblemInstance& p);

}  // namespace ibopt
