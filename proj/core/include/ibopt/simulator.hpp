#pragma once

#include <functional>

#include "ibopt/methods.hpp"
#include "ibopt/trace.hpp"

namespace ibopt {

struct RunOptions {
  // Called for every recorded round with the published iterate.
  std::function<void(std::int64_t, const Vector&)> on_record;
};

// Drives the configured method for `rounds` rounds; the trace is bit-identical
// for identical (problem, cfg, x0, master_seed).
Trace run_synchronous(const ProblemInstance& p, const MethodConfig& cfg,
                      const Vector& x0, std::int64_t rounds,
                      std::uint64_t master_seed, const RunOptions& opts = {});

// Bounded-delay parameter server: worker contributions are stochastic block
// proposals computed from stale iterates, the server averages the freshest
// landed contribution per worker and publishes prox of the average.
Trace run_asynchronous(const ProblemInstance& p, const MethodConfig& cfg,
                       const Vector& x0, std::int64_t rounds,
                       const DelaySchedule& delays, std::uint64_t master_seed,
                       const RunOptions& opts = {});

// Per-round mean and standard error of each metric across independent seeds.
struct MeanTrace {
  std::vector<std::int64_t> rounds;
  std::vector<double> subopt_mean, subopt_se;
  std::vector<double> dist_mean, dist_se;
  std::vector<double> grad_mean, grad_se;
  std::vector<double> lyapunov_mean, lyapunov_se;        // empty when absent
  std::vector<double> subopt_wavg_mean, subopt_wavg_se;  // empty when absent
  int n_seeds = 0;

  std::size_t size() const { return rounds.size(); }
};

MeanTrace monte_carlo(const ProblemInstance& p, const MethodConfig& cfg,
                      const Vector& x0, std::int64_t rounds, int n_seeds,
                      std::uint64_t base_seed);

std::uint64_t seed_for_replica(std::uint64_t base_seed, int replica);

// Seed-averaged records in trace form (means of every column).
Trace mean_trace_to_trace(const MeanTrace& mt, const Trace& shape);

}  // namespace ibopt
