#include "ibopt/suites.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ibopt/experiment.hpp"
#include "ibopt/oracles.hpp"
#include "ibopt/simulator.hpp"

namespace ibopt {

namespace {

CheckResult check_le(std::string name, double measured, double threshold,
                     std::string note = "") {
  return {std::move(name), measured, threshold, "<=", measured <= threshold,
          std::move(note)};
}

CheckResult check_ge(std::string name, double measured, double threshold,
                     std::string note = "") {
  return {std::move(name), measured, threshold, ">=", measured >= threshold,
          std::move(note)};
}

CheckResult check_true(std::string name, bool ok, std::string note = "") {
  return {std::move(name), ok ? 1.0 : 0.0, 1.0, "==", ok, std::move(note)};
}

std::string trace_to_string(const Trace& tr) {
  std::ostringstream os;
  write_trace_csv(tr, os);
  return os.str();
}

Vector seeded_point(int d, std::uint64_t seed, double scale) {
  Rng rng(seed);
  Vector x(d);
  for (int i = 0; i < d; ++i) x[i] = scale * rng.normal();
  return x;
}

// Fit window: rounds where the metric sits inside [lo, hi].
std::pair<std::int64_t, std::int64_t> fit_window(
    const std::vector<std::int64_t>& rounds, const std::vector<double>& vals,
    double lo, double hi) {
  std::int64_t t0 = -1, t1 = -1;
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    if (vals[i] <= hi && vals[i] >= lo) {
      if (t0 < 0) t0 = rounds[i];
      t1 = rounds[i];
    }
  }
  if (t0 < 0 || t1 <= t0) {
    throw std::runtime_error("rate fit: no usable window in trace");
  }
  return {t0, t1};
}

}  // namespace

std::vector<CheckResult> suite_moments() {
  std::vector<CheckResult> out;
  const int d = 8, o = 6;
  for (int n = 1; n <= 2; ++n) {
    const ProblemInstance p = quadratic_synthesize(d, n, o, 11);
    const Vector x = seeded_point(d, 77, 1.0);
    for (int m = 2; m <= 4; ++m) {
      const BlockPartition part = partition_uniform(d, m);
      for (int k = 1; k <= m; ++k) {
        const double tau = static_cast<double>(k) / m;
        const double gamma = stepsize_default(MethodKind::ibcd, p, n, tau).gamma;
        const MomentResult mo = moment_oracle(p, x, part, tau, n, gamma);
        const Vector mean_cf = mean_step_closed_form(p, x, tau, gamma);
        const double var_cf = variance_closed_form(p, x, tau, gamma, n);
        std::ostringstream tag;
        tag << "moments m=" << m << " taum=" << k << " n=" << n;
        out.push_back(check_le(tag.str() + " mean-error",
                               (mo.mean - mean_cf).lpNorm<Eigen::Infinity>(),
                               1e-12, "vs first-moment closed form"));
        out.push_back(check_le(tag.str() + " var-error",
                               std::abs(mo.variance - var_cf) /
                                   std::max(1.0, std::abs(var_cf)),
                               1e-12, "vs second-moment closed form"));
      }
    }
  }
  return out;
}

std::vector<CheckResult> suite_rates() {
  std::vector<CheckResult> out;
  const int d = 100, n = 30, o = 20;
  const ProblemInstance p = quadratic_synthesize(d, n, o, 1);
  const double tau = 1.0 / n;

  MethodConfig cfg;
  cfg.kind = MethodKind::ibcd;
  cfg.n_workers = n;
  cfg.m_blocks = n;
  cfg.tau = tau;
  cfg.step = stepsize_default(MethodKind::ibcd, p, n, tau);

  const RateBundle rb = theoretical_rate(MethodKind::ibcd, p, n, tau, cfg.step.gamma);
  const Vector x0 = make_x0(p, "ones", 5.0, 1);
  const double dist0 = (x0 - p.x_star()).squaredNorm();

  const MeanTrace mt = monte_carlo(p, cfg, x0, 500, 100, 2024);
  double worst = 0;
  for (std::size_t i = 0; i < mt.size(); ++i) {
    const double envelope =
        std::pow(rb.factor, static_cast<double>(mt.rounds[i])) * dist0;
    worst = std::max(worst, mt.dist_mean[i] / envelope);
  }
  out.push_back(check_le("rates ibcd-envelope max(mean/envelope)", worst, 1.1,
                         "100 seeds, 500 rounds, factor=" +
                             format_double(rb.factor)));

  // Corollary reductions of the rate formulas.
  const double factor_cor = 1.0 - (p.strong_convexity() / (2 * p.smoothness())) /
                                      (3.0 - 2.0 / n);
  out.push_back(check_le("rates corollary tau=1/n factor", std::abs(rb.factor - factor_cor),
                         1e-12, "1 - (mu/2L)/(3 - 2/n)"));

  {
    const ProblemInstance ps = quadratic_synthesize(20, 5, 8, 2);
    const double g = 5.0 / (5.0 * ps.smoothness());  // n/(5L), tau = 1/n
    const RateBundle rs =
        theoretical_rate(MethodKind::isaga_shared, ps, 5, 1.0 / 5, g);
    const double N = ps.global_count();
    out.push_back(check_le("rates saga-corollary c", std::abs(rs.c - 3.0 / 25.0),
                           1e-12, "c = 3/n^2"));
    const double rho_cor =
        std::min(ps.strong_convexity() / (5 * ps.smoothness()), 1.0 / (3.0 * N));
    out.push_back(check_le("rates saga-corollary theta",
                           std::abs(rs.theta - rho_cor), 1e-12,
                           "theta = min{mu/5L, 1/(3N)}"));
  }

  // Stepsize bounds must reject gammas beyond the theorems.
  auto rejects = [&](MethodKind kind, int nn, double tt, double g) {
    try {
      theoretical_rate(kind, p, nn, tt, g);
      return false;
    } catch (const std::invalid_argument&) {
      return true;
    }
  };
  out.push_back(check_true("rates reject gamma beyond ibcd bound",
                           rejects(MethodKind::ibcd, n, tau, cfg.step.gamma * 1.2)));
  out.push_back(check_true(
      "rates reject gamma beyond saga bound",
      rejects(MethodKind::isaga_shared, n, tau,
              1.2 / (p.smoothness() * (3.0 / n + tau)))));
  out.push_back(check_true(
      "rates reject gamma beyond sega bound",
      rejects(MethodKind::isega, n, tau,
              1.2 * stepsize_default(MethodKind::isega, p, n, tau).gamma)));
  out.push_back(check_true(
      "rates reject gamma beyond async bound",
      rejects(MethodKind::async_isgd, n, tau,
              1.2 * stepsize_default(MethodKind::async_isgd, p, n, tau).gamma)));
  return out;
}

std::vector<CheckResult> suite_reductions() {
  std::vector<CheckResult> out;
  {
    const ProblemInstance p = quadratic_synthesize(40, 6, 10, 3);
    const Vector x0 = make_x0(p, "ones", 5.0, 1);
    MethodConfig gd;
    gd.kind = MethodKind::gd;
    gd.n_workers = 6;
    gd.m_blocks = 8;
    gd.step = stepsize_default(MethodKind::gd, p, 6, 1.0);
    MethodConfig ibcd = gd;
    ibcd.kind = MethodKind::ibcd;
    ibcd.tau = 1.0;
    const Trace a = run_synchronous(p, gd, x0, 100, 99);
    const Trace b = run_synchronous(p, ibcd, x0, 100, 99);
    out.push_back(check_true("reductions ibcd(tau=1) == gd trace bytes",
                             trace_to_string(a) == trace_to_string(b),
                             "100 rounds, identical master seed"));
  }
  {
    const SparseDataset ds = synth_sparse_dataset(60, 12, 21, 3, 8);
    const ProblemInstance p = logreg_build(ds, 1e-3);
    const Vector x0 = Vector::Zero(p.dim());
    MethodConfig saga;
    saga.kind = MethodKind::saga;
    saga.n_workers = 1;
    saga.m_blocks = 4;
    saga.step = stepsize_default(MethodKind::saga, p, 1, 1.0);
    MethodConfig isaga = saga;
    isaga.kind = MethodKind::isaga_shared;
    isaga.tau = 1.0;
    const Trace a = run_synchronous(p, saga, x0, 100, 7);
    const Trace b = run_synchronous(p, isaga, x0, 100, 7);
    out.push_back(check_true("reductions isaga(n=1,tau=1) == saga trace bytes",
                             trace_to_string(a) == trace_to_string(b),
                             "classical SAGA reference, 100 rounds"));
  }
  return out;
}

std::vector<CheckResult> suite_comm() {
  std::vector<CheckResult> out;
  const int d = 100, n = 100, o = 20, m = 100;
  const ProblemInstance p = quadratic_synthesize(d, n, o, 5);
  const double tau = 1.0 / n;
  const Vector x0 = make_x0(p, "ones", 5.0, 1);
  const double dist0 = (x0 - p.x_star()).squaredNorm();

  MethodConfig ibcd;
  ibcd.kind = MethodKind::ibcd;
  ibcd.n_workers = n;
  ibcd.m_blocks = m;
  ibcd.tau = tau;
  ibcd.step = stepsize_default(MethodKind::ibcd, p, n, tau);

  MethodConfig gd = ibcd;
  gd.kind = MethodKind::gd;
  gd.tau = 1.0;
  gd.step = stepsize_default(MethodKind::gd, p, n, 1.0);

  const RateBundle rb = theoretical_rate(MethodKind::ibcd, p, n, tau, ibcd.step.gamma);
  std::int64_t rounds = static_cast<std::int64_t>(
      std::ceil(std::log(dist0 / 1e-19) / -std::log1p(rb.factor - 1.0)));
  rounds = std::min<std::int64_t>(rounds, 20000);

  const Trace gd_trace = run_synchronous(p, gd, x0, rounds, 1);
  const MeanTrace ibcd_mt = monte_carlo(p, ibcd, x0, rounds, 8, 500);

  {
    const Trace probe = run_synchronous(p, ibcd, x0, 50, 1);
    const CommSummary cs = comm_accounting(probe);
    out.push_back(check_le("comm savings_ratio == 0.99",
                           std::abs(cs.savings_ratio - 0.99), 1e-12,
                           "n=100, tau=1/100, m=100"));
  }

  std::vector<std::int64_t> gd_rounds;
  std::vector<double> gd_vals;
  for (const auto& r : gd_trace.records) {
    gd_rounds.push_back(r.round);
    gd_vals.push_back(r.dist_sq);
  }
  const auto [g0, g1] = fit_window(gd_rounds, gd_vals, 1e-18, 1e-3 * dist0);
  const double f_gd = empirical_rate_fit(gd_rounds, gd_vals, g0, g1);
  const auto [i0, i1] = fit_window(ibcd_mt.rounds, ibcd_mt.dist_mean, 1e-18,
                                   1e-3 * dist0);
  const double f_ibcd = empirical_rate_fit(ibcd_mt.rounds, ibcd_mt.dist_mean, i0, i1);
  const double ratio = std::log(f_gd) / std::log(f_ibcd);
  out.push_back(check_ge("comm fitted-rate ratio gd/ibcd lower", ratio, 1.0,
                         "fitted factors gd=" + format_double(f_gd) +
                             " ibcd=" + format_double(f_ibcd)));
  out.push_back(check_le("comm fitted-rate ratio gd/ibcd upper", ratio, 3.2,
                         "corollary constant 1/(3-2/n)"));

  {
    const ProblemInstance ps = quadratic_synthesize(20, 5, 5, 6);
    MethodConfig ibgd;
    ibgd.kind = MethodKind::ibgd;
    ibgd.n_workers = 5;
    ibgd.m_blocks = 10;
    ibgd.tau = 0.3;
    ibgd.step = stepsize_default(MethodKind::ibgd, ps, 5, 0.3);
    const std::int64_t rr = 10000;
    const Trace tr = run_synchronous(ps, ibgd, make_x0(ps, "ones", 5.0, 1), rr, 11);
    const double mean_up = static_cast<double>(tr.total_blocks_up) / rr;
    const double expect = 0.3 * 5 * 10;
    // per-round variance of m * Binomial(n, tau)
    const double se = std::sqrt(10.0 * 10.0 * 5.0 * 0.3 * 0.7 / rr);
    out.push_back(check_le("comm ibgd mean blocks_up/round",
                           std::abs(mean_up - expect), 4 * se,
                           "expected tau*n*m = " + format_double(expect)));
  }
  return out;
}

std::vector<CheckResult> suite_async() {
  std::vector<CheckResult> out;
  const int d = 30, n = 4, o = 60, m = 6;
  const double tau = 0.5;
  const ProblemInstance p = quadratic_synthesize(d, n, o, 6);
  const double mu_w = worker_strong_convexity(p);
  const Vector x0 = make_x0(p, "ones", 5.0, 1);
  const double dist0 = (x0 - p.x_star()).squaredNorm();

  MethodConfig async;
  async.kind = MethodKind::async_isgd;
  async.n_workers = n;
  async.m_blocks = m;
  async.tau = tau;
  async.step = stepsize_default(MethodKind::async_isgd, p, n, tau);
  async.stoch.batch_size = 2;

  {
    MethodConfig sync = async;
    sync.kind = MethodKind::isgd;
    const Trace a = run_asynchronous(p, async, x0, 200, DelaySchedule::none_schedule(), 4);
    const Trace b = run_synchronous(p, sync, x0, 200, 4);
    out.push_back(check_true("async M=0 == synchronous isgd trace bytes",
                             trace_to_string(a) == trace_to_string(b)));
  }

  {
    const Trace tr =
        run_asynchronous(p, async, x0, 300, DelaySchedule::fixed(2), 5);
    int age_max = 0;
    for (int a : tr.max_age_per_round) age_max = std::max(age_max, a);
    out.push_back(check_le("async fixed M=2 max consumed age", age_max, 2));
  }

  {
    const Trace tr =
        run_asynchronous(p, async, x0, 400, DelaySchedule::uniform(4), 6);
    bool ok = true;
    for (std::size_t k = 0; k < tr.epoch_starts.size(); ++k) {
      if (tr.epoch_starts[k] > static_cast<std::int64_t>(4 * k)) ok = false;
    }
    out.push_back(check_true("async epoch bound T_k <= M*k", ok,
                             std::to_string(tr.epoch_starts.size()) + " epochs"));
  }

  // Per-epoch contraction envelope, exact gradients.
  MethodConfig exact = async;
  exact.stoch.batch_size = 0;
  const double gamma = exact.step.gamma;
  for (int M : {1, 2, 4}) {
    MethodConfig cfg = exact;
    cfg.delays = M == 1 ? DelaySchedule::fixed(1) : DelaySchedule::fixed(M);
    const MeanTrace mt = monte_carlo(p, cfg, x0, 400, 100, 900 + M);
    const double factor = 1.0 - tau * gamma * mu_w;
    double worst = 0;
    for (std::size_t i = 0; i < mt.size(); ++i) {
      const double env =
          std::pow(factor, std::floor(static_cast<double>(mt.rounds[i]) / M)) * dist0;
      worst = std::max(worst, mt.dist_mean[i] / env);
    }
    out.push_back(check_le("async envelope M=" + std::to_string(M) +
                               " max(mean/envelope)",
                           worst, 1.1,
                           "epoch factor " + format_double(factor)));
  }

  // Noise floor: minibatch noise at the optimum, envelope plus 4 gamma sigma^2/(mu n).
  {
    const ProblemInstance pn = quadratic_synthesize(d, n, o, 6, 0.5);
    const double mu_wn = worker_strong_convexity(pn);
    MethodConfig cfg = async;
    cfg.stoch.batch_size = 1;
    cfg.delays = DelaySchedule::fixed(2);
    double sigma_sq = 0;
    for (int i = 0; i < n; ++i) {
      sigma_sq = std::max(sigma_sq, minibatch_variance(pn, i, pn.x_star(), 1));
    }
    const double floor = 4.0 * cfg.step.gamma * sigma_sq / (mu_wn * n);
    const MeanTrace mt = monte_carlo(pn, cfg, x0, 600, 100, 31);
    const double factor = 1.0 - tau * cfg.step.gamma * mu_wn;
    double worst = 0;
    for (std::size_t i = 0; i < mt.size(); ++i) {
      const double env =
          std::pow(factor, std::floor(static_cast<double>(mt.rounds[i]) / 2.0)) * dist0 +
          floor;
      worst = std::max(worst, mt.dist_mean[i] / env);
    }
    out.push_back(check_le("async noisy envelope M=2 max(mean/envelope)", worst,
                           1.1, "floor 4*gamma*sigma^2/(mu n) = " +
                                    format_double(floor)));
  }
  return out;
}

std::vector<CheckResult> run_suite(const std::string& name) {
  if (name == "moments") return suite_moments();
  if (name == "rates") return suite_rates();
  if (name == "reductions") return suite_reductions();
  if (name == "comm") return suite_comm();
  if (name == "async") return suite_async();
  throw std::invalid_argument(
      "unknown suite '" + name + "' (expected moments|rates|reductions|comm|async)");
}

bool all_passed(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks) {
    if (!c.pass) return false;
  }
  return true;
}

}  // namespace ibopt
