#include "ibopt/simulator.hpp"

#include <cmath>
#include <deque>
#include <stdexcept>

namespace ibopt {

bool trace_should_record(std::int64_t t, std::int64_t total_rounds) {
  constexpr std::int64_t kDenseLimit = 100000;
  if (t <= kDenseLimit) return true;
  if (t == total_rounds) return true;
  std::int64_t stride = 1;
  while (t / stride > kDenseLimit) stride <<= 1;
  return t % stride == 0;  // keeps every power of two past the dense range
}

CommSummary comm_accounting(const Trace& trace) {
  if (trace.records.empty() || trace.rounds < 1) {
    throw std::invalid_argument("comm_accounting: empty trace");
  }
  CommSummary s;
  s.total_up = trace.total_blocks_up;
  s.total_down = trace.total_blocks_down;
  const double r = static_cast<double>(trace.rounds);
  s.mean_up = static_cast<double>(s.total_up) / r;
  s.mean_down = static_cast<double>(s.total_down) / r;
  const double dense = static_cast<double>(trace.n_workers) *
                       static_cast<double>(trace.m_blocks) * r;
  s.savings_ratio = 1.0 - static_cast<double>(s.total_up) / dense;
  return s;
}

namespace {

struct MetricContext {
  Vector x_ref;
  double f_ref = 0;
};

MetricContext resolve_reference(const ProblemInstance& p, const Regularizer& reg) {
  MetricContext ctx;
  if (reg.is_zero()) {
    ctx.x_ref = p.x_star();
    ctx.f_ref = p.f_star();
  } else {
    auto [x, f] = solve_reference_from(p, reg, 1e-12, Vector::Zero(p.dim()));
    ctx.x_ref = std::move(x);
    ctx.f_ref = f;
  }
  return ctx;
}

void append_record(Trace& trace, const ProblemInstance& p,
                   const MethodConfig& cfg, const MetricContext& ctx,
                   std::int64_t t, const Vector& x, const StepStats& stats,
                   std::optional<double> lyap, const RunOptions& opts) {
  TraceRecord rec;
  rec.round = t;
  rec.subopt = p.value(x) + reg_value(cfg.reg, x) - ctx.f_ref;
  rec.dist_sq = (x - ctx.x_ref).squaredNorm();
  rec.grad_sq = p.grad(x).squaredNorm();
  rec.lyapunov = lyap;
  rec.blocks_up = stats.blocks_up;
  rec.blocks_down = stats.blocks_down;
  if (!trace.records.empty() && trace.records.back().round >= t) {
    throw std::logic_error("trace rounds must be strictly increasing");
  }
  if (rec.blocks_up > static_cast<std::int64_t>(trace.n_workers) * trace.m_blocks) {
    throw std::logic_error("blocks_up exceeds n*m");
  }
  trace.records.push_back(std::move(rec));
  if (opts.on_record) opts.on_record(t, x);
}

Trace run_synchronous_impl(const ProblemInstance& p, const MethodConfig& cfg,
                           const Vector& x0, std::int64_t rounds,
                           std::uint64_t master_seed, const RunOptions& opts,
                           const MetricContext& ctx) {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (cfg.kind == MethodKind::async_isgd) {
    throw std::invalid_argument("async_isgd runs through run_asynchronous");
  }
  Engine eng(p, cfg, x0, master_seed);

  Trace trace;
  trace.method = method_name(cfg.kind);
  trace.n_workers = cfg.n_workers;
  trace.m_blocks = cfg.m_blocks;
  trace.rounds = rounds;

  auto lyap = [&]() -> std::optional<double> {
    if (eng.has_lyapunov()) return eng.lyapunov();
    return std::nullopt;
  };
  append_record(trace, p, cfg, ctx, 0, eng.iterate(), StepStats{}, lyap(), opts);
  if (cfg.step.decreasing) {
    trace.subopt_weighted_avg.push_back(trace.records.back().subopt);
  }

  for (std::int64_t t = 1; t <= rounds; ++t) {
    StepStats stats = eng.step();
    trace.total_blocks_up += stats.blocks_up;
    trace.total_blocks_down += stats.blocks_down;
    if (trace_should_record(t, rounds)) {
      append_record(trace, p, cfg, ctx, t, eng.iterate(), stats, lyap(), opts);
      if (cfg.step.decreasing) {
        const Vector xa = eng.weighted_average();
        trace.subopt_weighted_avg.push_back(p.value(xa) + reg_value(cfg.reg, xa) -
                                            ctx.f_ref);
      }
    }
  }
  return trace;
}

struct PendingProposal {
  std::int64_t land = 0;
  std::int64_t read = 0;
  Vector value;
};

Trace run_asynchronous_impl(const ProblemInstance& p, const MethodConfig& cfg,
                            const Vector& x0, std::int64_t rounds,
                            const DelaySchedule& delays,
                            std::uint64_t master_seed, const RunOptions& opts,
                            const MetricContext& ctx) {
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (cfg.kind != MethodKind::async_isgd) {
    throw std::invalid_argument("run_asynchronous drives async_isgd only");
  }
  cfg.validate(p);
  const int n = cfg.n_workers;
  const double gamma = cfg.step.gamma;
  const int max_age = delays.max_age();
  BlockPartition part = partition_uniform(p.dim(), cfg.m_blocks);

  Trace trace;
  trace.method = method_name(cfg.kind);
  trace.n_workers = n;
  trace.m_blocks = cfg.m_blocks;
  trace.rounds = rounds;

  // Ring of recently published iterates; index t % (max_age + 1).
  std::vector<Vector> ring(static_cast<std::size_t>(max_age) + 1);
  auto published = [&](std::int64_t t) -> const Vector& {
    return ring[static_cast<std::size_t>(t % (max_age + 1))];
  };
  ring[0] = x0;

  struct WorkerSlot {
    std::int64_t read = 0;
    Vector value;
    std::deque<PendingProposal> pending;
  };
  std::vector<WorkerSlot> slots(n);

  append_record(trace, p, cfg, ctx, 0, x0, StepStats{}, std::nullopt, opts);

  // Round-0 dispatch: the initial worker contributions.
  StepStats incoming;
  for (int i = 0; i < n; ++i) {
    slots[i].read = 0;
    slots[i].value =
        isgd_proposal(p, part, cfg, x0, i, 0, master_seed, gamma, &incoming);
  }

  for (std::int64_t t = 1; t <= rounds; ++t) {
    StepStats stats = incoming;
    incoming = StepStats{};

    int age_max_realized = 0;
    Vector sum = Vector::Zero(p.dim());
    for (int i = 0; i < n; ++i) {
      WorkerSlot& s = slots[i];
      while (!s.pending.empty() && s.pending.front().land <= t) {
        PendingProposal& pp = s.pending.front();
        if (pp.read > s.read) {
          s.read = pp.read;
          s.value = std::move(pp.value);
        }
        s.pending.pop_front();
      }
      const int age = static_cast<int>(t - s.read);
      if (age < 1 || age > max_age) {
        throw std::logic_error("async: consumed iterate age " +
                               std::to_string(age) + " outside [1, M]");
      }
      age_max_realized = std::max(age_max_realized, age);
      sum += s.value;
    }
    Vector w = sum / static_cast<double>(n);
    Vector x = cfg.reg.is_zero() ? std::move(w) : prox_apply(cfg.reg, gamma, w);
    ring[static_cast<std::size_t>(t % (max_age + 1))] = std::move(x);

    trace.max_age_per_round.push_back(age_max_realized);
    if (trace.epoch_starts.empty()) trace.epoch_starts.push_back(0);
    if (t - age_max_realized >= trace.epoch_starts.back()) {
      trace.epoch_starts.push_back(t);
    }

    // Next round's dispatches, read from the fresh iterate.
    if (t < rounds) {
      for (int i = 0; i < n; ++i) {
        const int delay = delays.draw(master_seed, i, t, n);
        PendingProposal pp;
        pp.land = t + delay;
        pp.read = t;
        pp.value = isgd_proposal(p, part, cfg, published(t), i, t, master_seed,
                                 gamma, &incoming);
        slots[i].pending.push_back(std::move(pp));
      }
    }

    trace.total_blocks_up += stats.blocks_up;
    trace.total_blocks_down += stats.blocks_down;
    if (trace_should_record(t, rounds)) {
      append_record(trace, p, cfg, ctx, t, published(t), stats, std::nullopt, opts);
    }
  }
  return trace;
}

}  // namespace

Trace run_synchronous(const ProblemInstance& p, const MethodConfig& cfg,
                      const Vector& x0, std::int64_t rounds,
                      std::uint64_t master_seed, const RunOptions& opts) {
  const MetricContext ctx = resolve_reference(p, cfg.reg);
  return run_synchronous_impl(p, cfg, x0, rounds, master_seed, opts, ctx);
}

Trace run_asynchronous(const ProblemInstance& p, const MethodConfig& cfg,
                       const Vector& x0, std::int64_t rounds,
                       const DelaySchedule& delays, std::uint64_t master_seed,
                       const RunOptions& opts) {
  const MetricContext ctx = resolve_reference(p, cfg.reg);
  return run_asynchronous_impl(p, cfg, x0, rounds, delays, master_seed, opts, ctx);
}

std::uint64_t seed_for_replica(std::uint64_t base_seed, int replica) {
  std::uint64_t s = base_seed + 0x9e3779b97f4a7c15ull *
                                    (static_cast<std::uint64_t>(replica) + 1);
  return splitmix64(s);
}

namespace {

struct Welford {
  std::vector<double> mean;
  std::vector<double> m2;
  int k = 0;

  void add(const std::vector<double>& v) {
    if (mean.empty()) {
      mean.assign(v.size(), 0.0);
      m2.assign(v.size(), 0.0);
    }
    if (v.size() != mean.size()) {
      throw std::logic_error("monte_carlo: mismatched record grids across seeds");
    }
    ++k;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double d0 = v[i] - mean[i];
      mean[i] += d0 / k;
      m2[i] += d0 * (v[i] - mean[i]);
    }
  }
  std::vector<double> se() const {
    std::vector<double> out(mean.size(), 0.0);
    if (k > 1) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = std::sqrt(std::max(0.0, m2[i]) / (static_cast<double>(k - 1) * k));
      }
    }
    return out;
  }
};

}  // namespace

MeanTrace monte_carlo(const ProblemInstance& p, const MethodConfig& cfg,
                      const Vector& x0, std::int64_t rounds, int n_seeds,
                      std::uint64_t base_seed) {
  if (n_seeds < 2) {
    throw std::invalid_argument("monte_carlo: n_seeds must be >= 2 "
                                "(standard errors are undefined otherwise)");
  }
  const MetricContext ctx = resolve_reference(p, cfg.reg);
  MeanTrace mt;
  mt.n_seeds = n_seeds;
  Welford subopt, dist, grad, lyap, wavg;
  bool has_lyap = false, has_wavg = false;
  for (int k = 0; k < n_seeds; ++k) {
    const std::uint64_t seed = seed_for_replica(base_seed, k);
    Trace tr = cfg.kind == MethodKind::async_isgd
                   ? run_asynchronous_impl(p, cfg, x0, rounds, cfg.delays, seed,
                                           {}, ctx)
                   : run_synchronous_impl(p, cfg, x0, rounds, seed, {}, ctx);
    if (k == 0) {
      mt.rounds.reserve(tr.records.size());
      for (const auto& r : tr.records) mt.rounds.push_back(r.round);
      has_lyap = tr.records.front().lyapunov.has_value();
      has_wavg = !tr.subopt_weighted_avg.empty();
    }
    std::vector<double> s, d, g, l;
    s.reserve(tr.records.size());
    for (const auto& r : tr.records) {
      s.push_back(r.subopt);
      d.push_back(r.dist_sq);
      g.push_back(r.grad_sq);
      if (has_lyap) l.push_back(r.lyapunov.value());
    }
    subopt.add(s);
    dist.add(d);
    grad.add(g);
    if (has_lyap) lyap.add(l);
    if (has_wavg) wavg.add(tr.subopt_weighted_avg);
  }
  mt.subopt_mean = subopt.mean;
  mt.subopt_se = subopt.se();
  mt.dist_mean = dist.mean;
  mt.dist_se = dist.se();
  mt.grad_mean = grad.mean;
  mt.grad_se = grad.se();
  if (has_lyap) {
    mt.lyapunov_mean = lyap.mean;
    mt.lyapunov_se = lyap.se();
  }
  if (has_wavg) {
    mt.subopt_wavg_mean = wavg.mean;
    mt.subopt_wavg_se = wavg.se();
  }
  return mt;
}

Trace mean_trace_to_trace(const MeanTrace& mt, const Trace& shape) {
  Trace out;
  out.method = shape.method;
  out.n_workers = shape.n_workers;
  out.m_blocks = shape.m_blocks;
  out.rounds = shape.rounds;
  out.total_blocks_up = shape.total_blocks_up;
  out.total_blocks_down = shape.total_blocks_down;
  if (shape.records.size() != mt.size()) {
    throw std::invalid_argument("mean_trace_to_trace: shape mismatch");
  }
  for (std::size_t i = 0; i < mt.size(); ++i) {
    TraceRecord r;
    r.round = mt.rounds[i];
    r.subopt = mt.subopt_mean[i];
    r.dist_sq = mt.dist_mean[i];
    r.grad_sq = mt.grad_mean[i];
    if (!mt.lyapunov_mean.empty()) r.lyapunov = mt.lyapunov_mean[i];
    r.blocks_up = shape.records[i].blocks_up;
    r.blocks_down = shape.records[i].blocks_down;
    out.records.push_back(r);
  }
  return out;
}

}  // namespace ibopt
