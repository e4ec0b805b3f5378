#include "ibopt/methods.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ibopt {

namespace {

constexpr std::int64_t kAuditEvery = 8192;

bool uses_worker_objectives(MethodKind k) {
  switch (k) {
    case MethodKind::saga:
    case MethodKind::isaga_shared:
      return false;
    default:
      return true;
  }
}

bool is_saga_kind(MethodKind k) {
  return k == MethodKind::saga || k == MethodKind::isaga_shared ||
         k == MethodKind::isaga_distributed;
}

}  // namespace

std::string method_name(MethodKind kind) {
  switch (kind) {
    case MethodKind::gd: return "gd";
    case MethodKind::cd_shared: return "cd_shared";
    case MethodKind::ibcd: return "ibcd";
    case MethodKind::ibgd: return "ibgd";
    case MethodKind::isgd: return "isgd";
    case MethodKind::isgd_nonconvex: return "isgd_nonconvex";
    case MethodKind::saga: return "saga";
    case MethodKind::isaga_shared: return "isaga_shared";
    case MethodKind::isaga_distributed: return "isaga_distributed";
    case MethodKind::isega: return "isega";
    case MethodKind::iasgd: return "iasgd";
    case MethodKind::async_isgd: return "async_isgd";
  }
  return "unknown";
}

MethodKind method_from_name(const std::string& name) {
  if (name == "gd") return MethodKind::gd;
  if (name == "cd_shared") return MethodKind::cd_shared;
  if (name == "ibcd") return MethodKind::ibcd;
  if (name == "ibgd") return MethodKind::ibgd;
  if (name == "isgd") return MethodKind::isgd;
  if (name == "isgd_nonconvex") return MethodKind::isgd_nonconvex;
  if (name == "saga") return MethodKind::saga;
  if (name == "isaga_shared") return MethodKind::isaga_shared;
  if (name == "isaga_distributed") return MethodKind::isaga_distributed;
  if (name == "isega") return MethodKind::isega;
  if (name == "iasgd") return MethodKind::iasgd;
  if (name == "async_isgd" || name == "async_iasgd") return MethodKind::async_isgd;
  throw std::invalid_argument("unknown method: " + name);
}

DelaySchedule DelaySchedule::fixed(int m) {
  if (m < 1) throw std::invalid_argument("fixed delay bound must be >= 1");
  DelaySchedule s;
  s.mode = Mode::fixed;
  s.bound = m;
  return s;
}

DelaySchedule DelaySchedule::uniform(int m) {
  if (m < 1) throw std::invalid_argument("uniform delay bound must be >= 1");
  DelaySchedule s;
  s.mode = Mode::uniform;
  s.bound = m;
  return s;
}

DelaySchedule DelaySchedule::adversarial(std::vector<int> list, int m) {
  if (list.empty()) throw std::invalid_argument("adversarial delay list is empty");
  for (int d : list) {
    if (d < 1 || d > m) {
      throw std::invalid_argument("adversarial delay " + std::to_string(d) +
                                  " exceeds bound M=" + std::to_string(m));
    }
  }
  DelaySchedule s;
  s.mode = Mode::adversarial;
  s.bound = m;
  s.delays = std::move(list);
  return s;
}

int DelaySchedule::draw(std::uint64_t master_seed, int worker,
                        std::int64_t round, int n_workers) const {
  switch (mode) {
    case Mode::none:
      return 1;
    case Mode::fixed:
      return max_age();
    case Mode::uniform: {
      Rng rng = Rng::stream(master_seed, static_cast<std::uint32_t>(worker),
                            round, StreamKind::delay);
      return 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(bound)));
    }
    case Mode::adversarial: {
      const std::size_t idx =
          (static_cast<std::size_t>(round) * n_workers + worker) % delays.size();
      return delays[idx];
    }
  }
  return 1;
}

void MethodConfig::validate(const ProblemInstance& p) const {
  if (n_workers < 1) throw std::invalid_argument("n_workers must be >= 1");
  if (m_blocks < 1 || m_blocks > p.dim()) {
    throw std::invalid_argument("m_blocks must be in [1, d]");
  }
  BlockPartition part = partition_uniform(p.dim(), m_blocks);
  resolve_block_count(part, tau);

  if (uses_worker_objectives(kind) && n_workers != p.n_workers()) {
    throw std::invalid_argument(
        "method " + method_name(kind) + " needs n_workers == problem workers (" +
        std::to_string(p.n_workers()) + "), got " + std::to_string(n_workers));
  }
  if (kind == MethodKind::isaga_shared && n_workers > p.global_count()) {
    throw std::invalid_argument("isaga_shared: fewer global components than workers");
  }
  if (kind == MethodKind::gd || kind == MethodKind::saga) {
    if (tau != 1.0) throw std::invalid_argument(method_name(kind) + " requires tau = 1");
  }
  if (kind == MethodKind::saga && n_workers != 1) {
    throw std::invalid_argument("saga is the single-machine reference; n_workers must be 1");
  }

  if (step.decreasing) {
    if (kind != MethodKind::isgd && kind != MethodKind::isgd_nonconvex) {
      throw std::invalid_argument("decreasing schedule only supported for isgd");
    }
    if (!(step.a > 0) || step.c < 0) {
      throw std::invalid_argument("decreasing schedule needs a > 0, c >= 0");
    }
  } else if (!(step.gamma > 0)) {
    throw std::invalid_argument("stepsize gamma must be > 0");
  }

  const bool allows_reg = kind == MethodKind::isgd ||
                          kind == MethodKind::isgd_nonconvex ||
                          kind == MethodKind::isega ||
                          kind == MethodKind::async_isgd;
  if (!allows_reg && !reg.is_zero()) {
    throw std::invalid_argument("method " + method_name(kind) +
                                " does not take a regularizer");
  }

  const bool stochastic_kind =
      kind == MethodKind::isgd || kind == MethodKind::isgd_nonconvex ||
      kind == MethodKind::iasgd || kind == MethodKind::async_isgd;
  if (!stochastic_kind && stoch.batch_size != 0) {
    throw std::invalid_argument("method " + method_name(kind) +
                                " uses exact gradients; batch_size must be 0");
  }
  if (stoch.batch_size < 0) throw std::invalid_argument("batch_size must be >= 0");
  if (stochastic_kind && stoch.batch_size > 0 && uses_worker_objectives(kind)) {
    for (int i = 0; i < p.n_workers(); ++i) {
      if (stoch.batch_size > p.inner_count(i)) {
        throw std::invalid_argument(
            "batch_size " + std::to_string(stoch.batch_size) +
            " exceeds the " + std::to_string(p.inner_count(i)) +
            " components of worker " + std::to_string(i));
      }
    }
  }

  if (kind == MethodKind::iasgd) {
    if (!accel || !(accel->rho_hat > 0)) {
      throw std::invalid_argument("iasgd needs a strong-growth rho_hat (set directly, "
                                  "via strong_growth_params, or by grid search)");
    }
    if (!(p.strong_convexity() > 0)) {
      throw std::invalid_argument("iasgd: the accelerated recursion needs mu > 0");
    }
  }

  if (kind == MethodKind::async_isgd) {
    if (step.decreasing) {
      throw std::invalid_argument("async_isgd uses a constant stepsize");
    }
    if (delays.mode == DelaySchedule::Mode::none && delays.bound != 0) {
      throw std::invalid_argument("delay mode none implies M = 0");
    }
  }

  if (kind == MethodKind::isaga_distributed && !p.satisfies_zero_grads()) {
    std::fprintf(stderr,
                 "warning: isaga_distributed assumes grad f_i(x*) = 0; "
                 "this problem does not satisfy it\n");
  }
}

StepsizeSchedule stepsize_default(MethodKind kind, const ProblemInstance& p,
                                  int n, double tau) {
  const double L = p.smoothness();
  const double mu = p.strong_convexity();
  switch (kind) {
    case MethodKind::gd:
      return StepsizeSchedule::constant(1.0 / (2.0 * L));
    case MethodKind::cd_shared:
      return StepsizeSchedule::constant(1.0 / L);
    case MethodKind::ibcd:
    case MethodKind::ibgd:
      return StepsizeSchedule::constant(n / (tau * n + 2.0 * (1.0 - tau)) / (2.0 * L));
    case MethodKind::isgd:
    case MethodKind::isgd_nonconvex: {
      const double a = 2.0 * (tau + 2.0 * (1.0 - tau) / n) * L;
      const double c = 0.25 * mu * tau;
      if (mu == 0.0) return StepsizeSchedule::constant(1.0 / a);
      return StepsizeSchedule::inverse_linear(a, c);
    }
    case MethodKind::saga:
      return StepsizeSchedule::constant(1.0 / (L * 4.0));
    case MethodKind::isaga_shared:
    case MethodKind::isaga_distributed:
      return StepsizeSchedule::constant(1.0 / (L * (3.0 / n + tau)));
    case MethodKind::isega: {
      const double g1 = 1.0 / (4.0 * L * (1.0 + 1.0 / (n * tau)));
      if (mu == 0.0) return StepsizeSchedule::constant(g1);
      const double g2 = 1.0 / (mu / tau + 4.0 * L / (n * tau));
      return StepsizeSchedule::constant(std::min(g1, g2));
    }
    case MethodKind::async_isgd:
      return StepsizeSchedule::constant(1.0 / (2.0 * L * (tau + 2.0 / n)));
    case MethodKind::iasgd:
      throw std::invalid_argument(
          "iasgd: the stepsize is derived from rho_hat inside the accelerated "
          "recursion; there is no scalar default");
  }
  throw std::invalid_argument("stepsize_default: unknown method kind");
}

std::pair<double, double> strong_growth_params(double rho_tilde,
                                               double sigma_tilde_sq,
                                               double rho_bar,
                                               double sigma_bar_sq, int n,
                                               double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw std::invalid_argument("strong_growth_params: tau must be in (0,1]");
  }
  if (n < 1) throw std::invalid_argument("strong_growth_params: n must be >= 1");
  if (rho_tilde < 0 || sigma_tilde_sq < 0 || rho_bar < 0 || sigma_bar_sq < 0) {
    throw std::invalid_argument("strong_growth_params: inputs must be >= 0");
  }
  const double mix = 1.0 / tau - 1.0 + rho_bar / tau;
  const double rho_hat = 1.0 + rho_tilde / n * mix;
  const double sigma_hat_sq = sigma_bar_sq / (n * tau) + sigma_tilde_sq / n * mix;
  return {rho_hat, sigma_hat_sq};
}

Vector isgd_proposal(const ProblemInstance& p, const BlockPartition& part,
                     const MethodConfig& cfg, const Vector& x_read, int worker,
                     std::int64_t round, std::uint64_t master_seed,
                     double gamma, StepStats* stats) {
  Rng rng = Rng::stream(master_seed, static_cast<std::uint32_t>(worker), round,
                        StreamKind::method);
  BlockSample U = sample_subset(part, cfg.tau, rng);
  Vector g = p.stochastic_grad(worker, x_read, cfg.stoch, rng);
  Vector prop = x_read;
  masked_axpy(prop, -gamma, g, U);
  if (stats) {
    stats->blocks_up += U.count();
    stats->blocks_down += part.m;
  }
  return prop;
}

Engine::Engine(const ProblemInstance& p, const MethodConfig& cfg, Vector x0,
               std::uint64_t master_seed)
    : p_(p), cfg_(cfg), master_seed_(master_seed) {
  cfg_.validate(p);
  if (cfg_.kind == MethodKind::gd) cfg_.tau = 1.0;
  part_ = partition_uniform(p.dim(), cfg_.m_blocks);
  if (x0.size() != p.dim()) throw std::invalid_argument("x0 dimension mismatch");
  x_ = std::move(x0);

  const int d = p.dim();
  switch (cfg_.kind) {
    case MethodKind::saga:
    case MethodKind::isaga_shared:
      alpha_.assign(static_cast<std::size_t>(p.global_count()), Vector::Zero(d));
      abar_ = Vector::Zero(d);
      break;
    case MethodKind::isaga_distributed:
      walpha_.resize(p.n_workers());
      wabar_.assign(p.n_workers(), Vector::Zero(d));
      for (int i = 0; i < p.n_workers(); ++i) {
        const int l = p.inner_count(i);
        if (l == 0) throw std::invalid_argument("isaga_distributed: empty worker " +
                                                std::to_string(i));
        walpha_[i].assign(static_cast<std::size_t>(l), Vector::Zero(d));
      }
      break;
    case MethodKind::isega:
      h_.assign(p.n_workers(), Vector::Zero(d));
      break;
    case MethodKind::iasgd: {
      accel_y_ = x_;
      accel_x_prev_ = x_;
      const double rho = cfg_.accel->rho_hat;
      accel_eta_ = 1.0 / (rho * p.smoothness());
      double alpha = std::sqrt(p.strong_convexity() / p.smoothness()) / rho;
      if (alpha > 1.0) alpha = 1.0;
      accel_beta_ = (1.0 - alpha) / (1.0 + alpha);
      break;
    }
    default:
      break;
  }

  if (cfg_.step.decreasing) {
    wavg_num_ = cfg_.step.a * x_;
    wavg_den_ = cfg_.step.a;
  }

  if (cfg_.record_lyapunov) {
    if (!is_saga_kind(cfg_.kind)) {
      throw std::invalid_argument("lyapunov recording needs a SAGA-family method");
    }
    if (cfg_.step.decreasing) {
      throw std::invalid_argument("lyapunov recording needs a constant stepsize");
    }
    const double gamma = cfg_.step.gamma;
    const double L = p.smoothness();
    const int n = cfg_.n_workers;
    lyap_c_ = (1.0 / gamma / L - 1.0 / n - cfg_.tau) / n;
    if (!(lyap_c_ > 0)) {
      throw std::invalid_argument(
          "lyapunov weight c <= 0: gamma exceeds 1/(L(3/n + tau))");
    }
    opt_grads_.reserve(static_cast<std::size_t>(p.global_count()));
    for (int j = 0; j < p.global_count(); ++j) {
      opt_grads_.push_back(p.grad_global(j, p.x_star()));
    }
    refresh_lyapunov_memory();
  }
}

void Engine::refresh_lyapunov_memory() {
  if (opt_grads_.empty()) return;
  double s = 0;
  if (cfg_.kind == MethodKind::isaga_distributed) {
    std::size_t flat = 0;
    for (int i = 0; i < p_.n_workers(); ++i) {
      for (const auto& a : walpha_[i]) s += (a - opt_grads_[flat++]).squaredNorm();
    }
  } else {
    for (std::size_t j = 0; j < alpha_.size(); ++j) {
      s += (alpha_[j] - opt_grads_[j]).squaredNorm();
    }
  }
  lyap_mem_sq_ = s;
}

bool Engine::has_lyapunov() const { return cfg_.record_lyapunov && lyap_c_ > 0; }

double Engine::lyapunov() const {
  const double dist = (x_ - p_.x_star()).squaredNorm();
  const double gamma = cfg_.step.gamma;
  return dist + lyap_c_ * gamma * gamma * lyap_mem_sq_;
}

Vector Engine::weighted_average() const {
  if (!cfg_.step.decreasing) {
    throw std::logic_error("weighted average only exists for decreasing schedules");
  }
  return wavg_num_ / wavg_den_;
}

void Engine::accumulate_weighted_average() {
  if (!cfg_.step.decreasing) return;
  if (t_ > (std::int64_t{1} << 53)) {
    throw std::runtime_error("decreasing schedule: round counter too large");
  }
  const double w = cfg_.step.a + cfg_.step.c * static_cast<double>(t_);
  wavg_num_ += w * x_;
  wavg_den_ += w;
}

void Engine::audit_saga_mean() const {
  auto check = [](const std::vector<Vector>& table, const Vector& abar) {
    Vector fresh = Vector::Zero(abar.size());
    for (const auto& a : table) fresh += a;
    fresh /= static_cast<double>(table.size());
    const double err = (fresh - abar).lpNorm<Eigen::Infinity>();
    if (err > 1e-10 * std::max(1.0, fresh.lpNorm<Eigen::Infinity>())) {
      throw std::runtime_error("SAGA running average drifted from table mean by " +
                               std::to_string(err));
    }
  };
  if (cfg_.kind == MethodKind::isaga_distributed) {
    for (int i = 0; i < p_.n_workers(); ++i) check(walpha_[i], wabar_[i]);
  } else if (!alpha_.empty()) {
    check(alpha_, abar_);
  }
}

void Engine::seed_saga_memory_at(const Vector& x) {
  if (cfg_.kind == MethodKind::isaga_distributed) {
    for (int i = 0; i < p_.n_workers(); ++i) {
      Vector sum = Vector::Zero(p_.dim());
      for (int j = 0; j < p_.inner_count(i); ++j) {
        walpha_[i][j] = p_.grad_inner(i, j, x);
        sum += walpha_[i][j];
      }
      wabar_[i] = sum / static_cast<double>(p_.inner_count(i));
    }
  } else if (!alpha_.empty()) {
    Vector sum = Vector::Zero(p_.dim());
    for (int j = 0; j < p_.global_count(); ++j) {
      alpha_[j] = p_.grad_global(j, x);
      sum += alpha_[j];
    }
    abar_ = sum / static_cast<double>(p_.global_count());
  } else {
    throw std::logic_error("seed_saga_memory_at: not a SAGA-family engine");
  }
  if (cfg_.record_lyapunov) refresh_lyapunov_memory();
}

void Engine::seed_sega_memory_at(const Vector& x) {
  if (cfg_.kind != MethodKind::isega) {
    throw std::logic_error("seed_sega_memory_at: not an ISEGA engine");
  }
  for (int i = 0; i < p_.n_workers(); ++i) h_[i] = p_.grad_full(i, x);
}

StepStats Engine::step() {
  StepStats stats;
  switch (cfg_.kind) {
    case MethodKind::gd:
    case MethodKind::cd_shared:
    case MethodKind::ibcd:
    case MethodKind::ibgd:
    case MethodKind::isgd:
    case MethodKind::isgd_nonconvex:
      stats = step_parallel_gradient();
      break;
    case MethodKind::saga:
      stats = step_saga_reference();
      break;
    case MethodKind::isaga_shared:
      stats = step_isaga_shared();
      break;
    case MethodKind::isaga_distributed:
      stats = step_isaga_distributed();
      break;
    case MethodKind::isega:
      stats = step_isega();
      break;
    case MethodKind::iasgd:
      stats = step_iasgd();
      break;
    case MethodKind::async_isgd:
      throw std::logic_error("async_isgd is driven by run_asynchronous");
  }
  ++t_;
  accumulate_weighted_average();

  if (is_saga_kind(cfg_.kind)) {
    if (++updates_since_audit_ >= kAuditEvery) {
      audit_saga_mean();
      if (cfg_.record_lyapunov) refresh_lyapunov_memory();
      updates_since_audit_ = 0;
    }
  }
  return stats;
}

StepStats Engine::step_parallel_gradient() {
  StepStats stats;
  const int n = cfg_.n_workers;
  const double gamma = cfg_.step.at(t_);
  const bool stochastic = cfg_.kind == MethodKind::isgd ||
                          cfg_.kind == MethodKind::isgd_nonconvex;

  BlockSample shared;
  if (cfg_.kind == MethodKind::cd_shared) {
    Rng srng = Rng::stream(master_seed_, kServerWorkerId, t_, StreamKind::server);
    shared = sample_subset(part_, cfg_.tau, srng);
  }

  Vector sum = Vector::Zero(p_.dim());
  for (int i = 0; i < n; ++i) {
    if (stochastic) {
      sum += isgd_proposal(p_, part_, cfg_, x_, i, t_, master_seed_, gamma, &stats);
      continue;
    }
    Rng rng = Rng::stream(master_seed_, static_cast<std::uint32_t>(i), t_,
                          StreamKind::method);
    Vector prop = x_;
    if (cfg_.kind == MethodKind::ibgd) {
      if (sample_bernoulli(cfg_.tau, rng)) {
        Vector g = p_.grad_full(i, x_);
        prop -= gamma * g;
        stats.blocks_up += part_.m;
      }
    } else {
      BlockSample U = cfg_.kind == MethodKind::cd_shared
                          ? shared
                          : sample_subset(part_, cfg_.tau, rng);
      Vector g = p_.grad_full(i, x_);
      masked_axpy(prop, -gamma, g, U);
      stats.blocks_up += U.count();
    }
    stats.blocks_down += part_.m;
    sum += prop;
  }
  x_ = sum / static_cast<double>(n);
  if (stochastic && !cfg_.reg.is_zero()) {
    x_ = prox_apply(cfg_.reg, gamma, x_);
  }
  return stats;
}

StepStats Engine::step_saga_reference() {
  StepStats stats;
  const double gamma = cfg_.step.gamma;
  const int N = p_.global_count();
  Rng srng = Rng::stream(master_seed_, kServerWorkerId, t_, StreamKind::server);
  const int j = static_cast<int>(srng.uniform_below(static_cast<std::uint64_t>(N)));

  Vector g = p_.grad_global(j, x_);
  Vector dir = g - alpha_[j] + abar_;
  x_ = x_ - gamma * dir;

  Vector delta = g - alpha_[j];
  if (has_lyapunov()) lyap_mem_sq_ -= (alpha_[j] - opt_grads_[j]).squaredNorm();
  alpha_[j] += delta;
  if (has_lyapunov()) lyap_mem_sq_ += (alpha_[j] - opt_grads_[j]).squaredNorm();
  const double inv_n = 1.0 / static_cast<double>(N);
  abar_ += inv_n * delta;

  stats.blocks_up = part_.m;
  stats.blocks_down = part_.m;
  return stats;
}

StepStats Engine::step_isaga_shared() {
  StepStats stats;
  const double gamma = cfg_.step.gamma;
  const int n = cfg_.n_workers;
  const int N = p_.global_count();

  // n distinct indices drawn jointly; this realizes the per-index update
  // probability n/N exactly and avoids write conflicts on the alpha table.
  Rng srng = Rng::stream(master_seed_, kServerWorkerId, t_, StreamKind::server);
  std::vector<int> js(n);
  for (int k = 0; k < n; ++k) {
    int j;
    bool dup;
    do {
      j = static_cast<int>(srng.uniform_below(static_cast<std::uint64_t>(N)));
      dup = false;
      for (int q = 0; q < k; ++q) {
        if (js[q] == j) {
          dup = true;
          break;
        }
      }
    } while (dup);
    js[k] = j;
  }

  const Vector abar_snapshot = abar_;
  const double inv_n = 1.0 / static_cast<double>(N);
  Vector sum = Vector::Zero(p_.dim());
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(master_seed_, static_cast<std::uint32_t>(i), t_,
                          StreamKind::method);
    BlockSample U = sample_subset(part_, cfg_.tau, rng);
    Vector g = p_.grad_global(js[i], x_);
    Vector dir = g - alpha_[js[i]] + abar_snapshot;
    Vector prop = x_;
    masked_axpy(prop, -gamma, dir, U);
    sum += prop;

    Vector delta = g - alpha_[js[i]];
    if (has_lyapunov()) {
      for (int b : U.blocks) {
        const int o = part_.block_begin(b), s = part_.block_size(b);
        lyap_mem_sq_ -=
            (alpha_[js[i]].segment(o, s) - opt_grads_[js[i]].segment(o, s)).squaredNorm();
      }
    }
    masked_axpy(alpha_[js[i]], 1.0, delta, U);
    if (has_lyapunov()) {
      for (int b : U.blocks) {
        const int o = part_.block_begin(b), s = part_.block_size(b);
        lyap_mem_sq_ +=
            (alpha_[js[i]].segment(o, s) - opt_grads_[js[i]].segment(o, s)).squaredNorm();
      }
    }
    masked_axpy(abar_, inv_n, delta, U);

    stats.blocks_up += U.count();
    stats.blocks_down += part_.m;
  }
  x_ = sum / static_cast<double>(n);
  return stats;
}

StepStats Engine::step_isaga_distributed() {
  StepStats stats;
  const double gamma = cfg_.step.gamma;
  const int n = cfg_.n_workers;
  Vector sum = Vector::Zero(p_.dim());
  std::size_t flat_base = 0;
  for (int i = 0; i < n; ++i) {
    const int l = p_.inner_count(i);
    Rng rng = Rng::stream(master_seed_, static_cast<std::uint32_t>(i), t_,
                          StreamKind::method);
    BlockSample U = sample_subset(part_, cfg_.tau, rng);
    const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(l)));

    Vector g = p_.grad_inner(i, j, x_);
    Vector dir = g - walpha_[i][j] + wabar_[i];
    Vector prop = x_;
    masked_axpy(prop, -gamma, dir, U);
    sum += prop;

    Vector delta = g - walpha_[i][j];
    const std::size_t flat = flat_base + static_cast<std::size_t>(j);
    if (has_lyapunov()) {
      for (int b : U.blocks) {
        const int o = part_.block_begin(b), s = part_.block_size(b);
        lyap_mem_sq_ -=
            (walpha_[i][j].segment(o, s) - opt_grads_[flat].segment(o, s)).squaredNorm();
      }
    }
    masked_axpy(walpha_[i][j], 1.0, delta, U);
    if (has_lyapunov()) {
      for (int b : U.blocks) {
        const int o = part_.block_begin(b), s = part_.block_size(b);
        lyap_mem_sq_ +=
            (walpha_[i][j].segment(o, s) - opt_grads_[flat].segment(o, s)).squaredNorm();
      }
    }
    masked_axpy(wabar_[i], 1.0 / static_cast<double>(l), delta, U);

    stats.blocks_up += U.count();
    stats.blocks_down += part_.m;
    flat_base += static_cast<std::size_t>(l);
  }
  x_ = sum / static_cast<double>(n);
  return stats;
}

StepStats Engine::step_isega() {
  StepStats stats;
  const double gamma = cfg_.step.gamma;
  const int n = cfg_.n_workers;
  const double inv_tau = 1.0 / cfg_.tau;
  Vector gsum = Vector::Zero(p_.dim());
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(master_seed_, static_cast<std::uint32_t>(i), t_,
                          StreamKind::method);
    BlockSample U = sample_subset(part_, cfg_.tau, rng);
    Vector grad = p_.grad_full(i, x_);
    Vector delta = grad - h_[i];
    gsum += h_[i];
    masked_axpy(gsum, inv_tau, delta, U);
    masked_axpy(h_[i], 1.0, delta, U);
    stats.blocks_up += U.count();
    stats.blocks_down += part_.m;
  }
  x_ = prox_apply(cfg_.reg, gamma, x_ - gamma * (gsum / static_cast<double>(n)));
  return stats;
}

StepStats Engine::step_iasgd() {
  StepStats stats;
  const int n = cfg_.n_workers;
  Vector qsum = Vector::Zero(p_.dim());
  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::stream(master_seed_, static_cast<std::uint32_t>(i), t_,
                          StreamKind::method);
    BlockSample U = sample_subset(part_, cfg_.tau, rng);
    Vector g = p_.stochastic_grad(i, accel_y_, cfg_.stoch, rng);
    masked_axpy(qsum, 1.0, g, U);
    stats.blocks_up += U.count();
    stats.blocks_down += part_.m;
  }
  Vector q = qsum / (static_cast<double>(n) * cfg_.tau);
  Vector x_next = accel_y_ - accel_eta_ * q;
  accel_y_ = x_next + accel_beta_ * (x_next - x_);
  accel_x_prev_ = x_;
  x_ = std::move(x_next);
  return stats;
}

}  // namespace ibopt
