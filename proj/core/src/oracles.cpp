#include "ibopt/oracles.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace ibopt {

Vector fd_gradient_of(const std::function<double(const Vector&)>& f,
                      const Vector& x, double h) {
  if (!(h > 0)) throw std::invalid_argument("fd_gradient: h must be > 0");
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double orig = x[c];
    xp[c] = orig + h;
    const double fp = f(xp);
    xp[c] = orig - h;
    const double fm = f(xp);
    xp[c] = orig;
    g[c] = (fp - fm) / (2 * h);
  }
  return g;
}

Vector fd_gradient(const ProblemInstance& p, int i, const Vector& x, double h) {
  return fd_gradient_of([&](const Vector& y) { return p.value_component(i, y); },
                        x, h);
}

Vector mean_step_closed_form(const ProblemInstance& p, const Vector& x,
                             double tau, double gamma) {
  return x - gamma * tau * p.grad(x);
}

double variance_closed_form(const ProblemInstance& p, const Vector& x,
                            double tau, double gamma, int n) {
  double s = 0;
  for (int i = 0; i < n; ++i) s += p.grad_full(i, x).squaredNorm();
  return gamma * gamma * tau * (1.0 - tau) / (static_cast<double>(n) * n) * s;
}

MomentResult moment_oracle(const ProblemInstance& p, const Vector& x,
                           const BlockPartition& part, double tau, int n,
                           double gamma, std::uint64_t mc_seed, int mc_draws) {
  if (n < 1 || n > p.n_workers()) {
    throw std::invalid_argument("moment_oracle: bad worker count");
  }
  const int k = resolve_block_count(part, tau);
  const double per_worker = subset_count(part.m, k);
  const double joint = std::pow(per_worker, n);

  std::vector<Vector> grads;
  grads.reserve(n);
  for (int i = 0; i < n; ++i) grads.push_back(p.grad_full(i, x));

  auto aggregate = [&](const std::vector<const BlockSample*>& subsets) {
    Vector agg = x;
    for (int i = 0; i < n; ++i) {
      masked_axpy(agg, -gamma / n, grads[i], *subsets[i]);
    }
    return agg;
  };

  MomentResult res;
  if (joint <= 1e6) {
    const std::vector<BlockSample> subsets = enumerate_subsets(part, tau);
    const std::size_t K = subsets.size();
    std::vector<std::size_t> idx(n, 0);
    std::vector<const BlockSample*> pick(n);

    Vector mean = Vector::Zero(p.dim());
    std::size_t count = 0;
    auto for_each_outcome = [&](auto&& visit) {
      std::fill(idx.begin(), idx.end(), 0);
      while (true) {
        for (int i = 0; i < n; ++i) pick[i] = &subsets[idx[i]];
        visit(pick);
        int pos = n - 1;
        while (pos >= 0 && ++idx[pos] == K) {
          idx[pos] = 0;
          --pos;
        }
        if (pos < 0) break;
      }
    };
    for_each_outcome([&](const std::vector<const BlockSample*>& pick) {
      mean += aggregate(pick);
      ++count;
    });
    mean /= static_cast<double>(count);
    double var = 0;
    for_each_outcome([&](const std::vector<const BlockSample*>& pick) {
      var += (aggregate(pick) - mean).squaredNorm();
    });
    var /= static_cast<double>(count);
    res.mean = std::move(mean);
    res.variance = var;
    res.n_outcomes = static_cast<double>(count);
    return res;
  }

  // Monte-Carlo fallback
  Rng rng(mc_seed);
  std::vector<BlockSample> draw(n);
  std::vector<const BlockSample*> pick(n);
  Vector mean = Vector::Zero(p.dim());
  std::vector<Vector> cache;
  cache.reserve(mc_draws);
  for (int it = 0; it < mc_draws; ++it) {
    for (int i = 0; i < n; ++i) draw[i] = sample_subset(part, tau, rng);
    for (int i = 0; i < n; ++i) pick[i] = &draw[i];
    cache.push_back(aggregate(pick));
    mean += cache.back();
  }
  mean /= static_cast<double>(mc_draws);
  double var = 0;
  for (const auto& v : cache) var += (v - mean).squaredNorm();
  var /= static_cast<double>(mc_draws);
  res.mean = std::move(mean);
  res.variance = var;
  res.n_outcomes = 0;
  return res;
}

RateBundle theoretical_rate(MethodKind kind, const ProblemInstance& p, int n,
                            double tau, double gamma) {
  const double L = p.smoothness();
  const double mu = p.strong_convexity();
  if (!(mu > 0)) {
    throw std::invalid_argument("theoretical_rate: mu > 0 required");
  }
  if (!(gamma > 0)) throw std::invalid_argument("theoretical_rate: gamma > 0 required");
  constexpr double slack = 1.0 + 1e-12;

  RateBundle rb;
  rb.kind = kind;
  rb.gamma = gamma;
  switch (kind) {
    case MethodKind::gd:
      tau = 1.0;
      [[fallthrough]];
    case MethodKind::ibcd:
    case MethodKind::ibgd: {
      const double bound = n / (tau * n + 2.0 * (1.0 - tau)) / (2.0 * L);
      if (gamma > bound * slack) {
        throw std::invalid_argument(
            "gamma exceeds the block-gradient bound n/(tau n + 2(1-tau)) / (2L) = " +
            std::to_string(bound));
      }
      rb.factor = 1.0 - mu * gamma * tau;
      return rb;
    }
    case MethodKind::saga:
      n = 1;
      tau = 1.0;
      [[fallthrough]];
    case MethodKind::isaga_shared: {
      const double bound = 1.0 / (L * (3.0 / n + tau));
      if (gamma > bound * slack) {
        throw std::invalid_argument("gamma exceeds the SAGA bound 1/(L(3/n + tau)) = " +
                                    std::to_string(bound));
      }
      const double N = static_cast<double>(p.global_count());
      rb.c = (1.0 / (gamma * L) - 1.0 / n - tau) / n;
      rb.theta = tau * std::min(gamma * mu, n / N - 2.0 / (n * N * rb.c));
      rb.factor = 1.0 - rb.theta;
      return rb;
    }
    case MethodKind::isaga_distributed: {
      const double bound = 1.0 / (L * (3.0 / n + tau));
      if (gamma > bound * slack) {
        throw std::invalid_argument("gamma exceeds the SAGA bound 1/(L(3/n + tau)) = " +
                                    std::to_string(bound));
      }
      const int l = p.inner_count(0);
      for (int i = 1; i < p.n_workers(); ++i) {
        if (p.inner_count(i) != l) {
          throw std::invalid_argument(
              "distributed SAGA rate assumes equal per-worker component counts");
        }
      }
      rb.c = (1.0 / (gamma * L) - 1.0 / n - tau) / n;
      rb.theta = tau * std::min(gamma * mu,
                                1.0 / l - 2.0 / (static_cast<double>(n) * n * l * rb.c));
      rb.factor = 1.0 - rb.theta;
      return rb;
    }
    case MethodKind::isega: {
      const double g1 = 1.0 / (4.0 * L * (1.0 + 1.0 / (n * tau)));
      const double g2 = 1.0 / (mu / tau + 4.0 * L / (n * tau));
      const double bound = std::min(g1, g2);
      if (gamma > bound * slack) {
        throw std::invalid_argument(
            "gamma exceeds the SEGA bound min{1/(4L(1+1/(n tau))), "
            "1/(mu/tau + 4L/(n tau))} = " +
            std::to_string(bound));
      }
      rb.factor = 1.0 - gamma * mu;
      return rb;
    }
    case MethodKind::async_isgd: {
      const double bound = 1.0 / (2.0 * L * (tau + 2.0 / n));
      if (gamma > bound * slack) {
        throw std::invalid_argument("gamma exceeds the async bound 1/(2L(tau + 2/n)) = " +
                                    std::to_string(bound));
      }
      rb.factor = 1.0 - tau * gamma * mu;  // per epoch of length <= M
      return rb;
    }
    default:
      throw std::invalid_argument("theoretical_rate: no linear-rate bundle for " +
                                  method_name(kind));
  }
}

double lyapunov_saga_shared(const Vector& x, const std::vector<Vector>& alpha,
                            const ProblemInstance& p, double c, double gamma) {
  if (!(c > 0)) throw std::invalid_argument("lyapunov: c must be > 0");
  double mem = 0;
  for (int j = 0; j < p.global_count(); ++j) {
    mem += (alpha[static_cast<std::size_t>(j)] - p.grad_global(j, p.x_star()))
               .squaredNorm();
  }
  return (x - p.x_star()).squaredNorm() + c * gamma * gamma * mem;
}

double lyapunov_saga_distributed(const Vector& x,
                                 const std::vector<std::vector<Vector>>& alpha,
                                 const ProblemInstance& p, double c,
                                 double gamma) {
  if (!(c > 0)) throw std::invalid_argument("lyapunov: c must be > 0");
  double mem = 0;
  for (int i = 0; i < p.n_workers(); ++i) {
    for (int j = 0; j < p.inner_count(i); ++j) {
      mem += (alpha[i][static_cast<std::size_t>(j)] -
              p.grad_inner(i, j, p.x_star()))
                 .squaredNorm();
    }
  }
  return (x - p.x_star()).squaredNorm() + c * gamma * gamma * mem;
}

namespace {

struct LogFit {
  double slope = 0;
  double r2 = 1;
  int n_points = 0;
};

LogFit fit_log(const std::vector<double>& xs, const std::vector<double>& values) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("rate fit: need at least two points in window");
  double sx = 0, sy = 0;
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(values[i] > 0)) {
      throw std::invalid_argument("rate fit: metric is not positive inside the window");
    }
    ys[i] = std::log(values[i]);
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0) throw std::invalid_argument("rate fit: degenerate window");
  LogFit f;
  f.slope = sxy / sxx;
  f.n_points = static_cast<int>(n);
  f.r2 = syy == 0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

std::pair<std::vector<double>, std::vector<double>> window_values(
    const std::vector<std::int64_t>& rounds, const std::vector<double>& values,
    std::int64_t t0, std::int64_t t1, bool log_x) {
  std::vector<double> xs, vs;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (rounds[i] < t0 || rounds[i] > t1) continue;
    if (log_x && rounds[i] < 1) continue;
    xs.push_back(log_x ? std::log(static_cast<double>(rounds[i]))
                       : static_cast<double>(rounds[i]));
    vs.push_back(values[i]);
  }
  return {std::move(xs), std::move(vs)};
}

std::vector<double> extract_metric(const Trace& trace, TraceMetric metric) {
  std::vector<double> v;
  v.reserve(trace.records.size());
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    switch (metric) {
      case TraceMetric::subopt: v.push_back(r.subopt); break;
      case TraceMetric::dist_sq: v.push_back(r.dist_sq); break;
      case TraceMetric::grad_sq: v.push_back(r.grad_sq); break;
      case TraceMetric::lyapunov:
        if (!r.lyapunov) throw std::invalid_argument("trace has no lyapunov column");
        v.push_back(*r.lyapunov);
        break;
      case TraceMetric::subopt_wavg:
        if (trace.subopt_weighted_avg.size() != trace.records.size()) {
          throw std::invalid_argument("trace has no weighted-average column");
        }
        v.push_back(trace.subopt_weighted_avg[i]);
        break;
    }
  }
  return v;
}

std::vector<std::int64_t> extract_rounds(const Trace& trace) {
  std::vector<std::int64_t> r;
  r.reserve(trace.records.size());
  for (const auto& rec : trace.records) r.push_back(rec.round);
  return r;
}

}  // namespace

double empirical_rate_fit(const std::vector<std::int64_t>& rounds,
                          const std::vector<double>& values, std::int64_t t0,
                          std::int64_t t1) {
  auto [xs, vs] = window_values(rounds, values, t0, t1, false);
  return std::exp(fit_log(xs, vs).slope);
}

double empirical_rate_fit(const Trace& trace, TraceMetric metric,
                          std::int64_t t0, std::int64_t t1) {
  return empirical_rate_fit(extract_rounds(trace), extract_metric(trace, metric),
                            t0, t1);
}

double loglog_slope_fit(const std::vector<std::int64_t>& rounds,
                        const std::vector<double>& values, std::int64_t t0,
                        std::int64_t t1) {
  auto [xs, vs] = window_values(rounds, values, t0, t1, true);
  return fit_log(xs, vs).slope;
}

double log_linear_r2(const std::vector<std::int64_t>& rounds,
                     const std::vector<double>& values, std::int64_t t0,
                     std::int64_t t1) {
  auto [xs, vs] = window_values(rounds, values, t0, t1, false);
  return fit_log(xs, vs).r2;
}

double minibatch_variance(const ProblemInstance& p, int i, const Vector& x,
                          int batch_size) {
  const int l = p.inner_count(i);
  if (batch_size <= 0 || batch_size >= l) return 0.0;
  const Vector full = p.grad_full(i, x);
  double var1 = 0;
  for (int j = 0; j < l; ++j) {
    var1 += (p.grad_inner(i, j, x) - full).squaredNorm();
  }
  var1 /= static_cast<double>(l);
  return var1 / batch_size;  // i.i.d. batch mean
}

MeasuredGrowth measure_strong_growth(const ProblemInstance& p,
                                     const std::vector<Vector>& points,
                                     int batch_size) {
  MeasuredGrowth g;
  const int n = p.n_workers();
  double sig_t = 0, sig_b = 0;
  for (int i = 0; i < n; ++i) {
    sig_t += p.grad_full(i, p.x_star()).squaredNorm();
    sig_b = std::max(sig_b, minibatch_variance(p, i, p.x_star(), batch_size));
  }
  g.sigma_tilde_sq = sig_t / n;
  g.sigma_bar_sq = sig_b;
  double rho_t = 0, rho_b = 0;
  for (const auto& x : points) {
    const double gf = p.grad(x).squaredNorm();
    double mean_gi = 0;
    for (int i = 0; i < n; ++i) {
      const double gi = p.grad_full(i, x).squaredNorm();
      mean_gi += gi;
      if (gi > 1e-300) {
        const double v = minibatch_variance(p, i, x, batch_size);
        rho_b = std::max(rho_b, std::max(0.0, v - g.sigma_bar_sq) / gi);
      }
    }
    mean_gi /= n;
    if (gf > 1e-300) {
      rho_t = std::max(rho_t, std::max(0.0, mean_gi - g.sigma_tilde_sq) / gf);
    }
  }
  g.rho_tilde = std::max(1.0, rho_t);
  g.rho_bar = rho_b;
  return g;
}

double measure_grad_dissimilarity_sq(const ProblemInstance& p,
                                     const std::vector<Vector>& points) {
  double nu_sq = 0;
  for (const auto& x : points) {
    const Vector gf = p.grad(x);
    double s = 0;
    for (int i = 0; i < p.n_workers(); ++i) {
      s += (gf - p.grad_full(i, x)).squaredNorm();
    }
    nu_sq = std::max(nu_sq, s / p.n_workers());
  }
  return nu_sq;
}

double inverse_power_lmin(const Matrix& A, double rel_tol, int max_iters) {
  Eigen::LDLT<Matrix> solver(A);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("inverse_power_lmin: factorization failed");
  }
  const Eigen::Index n = A.rows();
  Vector u = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] += 1e-3 * static_cast<double>(i % 5);
  u.normalize();
  double lambda = 0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = solver.solve(u);
    const double nw = w.norm();
    if (!(nw > 0)) break;
    w /= nw;
    const double next = w.dot(A * w);
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::max(std::abs(next), 1e-300)) {
      return next;
    }
    lambda = next;
    u = w;
  }
  return lambda;
}

double worker_strong_convexity(const ProblemInstance& p) {
  if (p.kind() != ProblemKind::quadratic) {
    throw std::invalid_argument("worker_strong_convexity: quadratic problems only");
  }
  double mu = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.n_workers(); ++i) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(p.quad_matrix(i),
                                             Eigen::EigenvaluesOnly);
    mu = std::min(mu, es.eigenvalues().minCoeff());
  }
  return std::max(0.0, mu);
}

}  // namespace ibopt
