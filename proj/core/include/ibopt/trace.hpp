#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ibopt {

// One recorded round. blocks_up / blocks_down count the blocks moved in the
// round that produced this iterate (0 for the initial record).
struct TraceRecord {
  std::int64_t round = 0;
  double subopt = 0.0;
  double dist_sq = 0.0;
  double grad_sq = 0.0;
  std::optional<double> lyapunov;
  std::int64_t blocks_up = 0;
  std::int64_t blocks_down = 0;
};

struct Trace {
  std::vector<TraceRecord> records;

  // Run metadata, used by communication accounting and reduction checks.
  std::string method;
  int n_workers = 0;
  int m_blocks = 0;
  std::int64_t rounds = 0;

  // Accumulated over every round, including rounds thinned out of records.
  std::int64_t total_blocks_up = 0;
  std::int64_t total_blocks_down = 0;

  // Suboptimality at the (gamma^k)^-1-weighted average iterate; parallel to
  // records, only filled for decreasing-schedule runs.
  std::vector<double> subopt_weighted_avg;

  // Asynchronous runs: epoch start rounds T_0, T_1, ... and the realized
  // maximum iterate age per round (index t-1 holds round t).
  std::vector<std::int64_t> epoch_starts;
  std::vector<int> max_age_per_round;

  const TraceRecord& back() const { return records.back(); }
  std::size_t size() const { return records.size(); }
};

// Every round is recorded up to 1e5; past that, geometric thinning that keeps
// every power of two and the final round.
bool trace_should_record(std::int64_t t, std::int64_t total_rounds);

struct CommSummary {
  std::int64_t total_up = 0;
  std::int64_t total_down = 0;
  double mean_up = 0.0;
  double mean_down = 0.0;
  double savings_ratio = 0.0;  // 1 - total_up / (n * m * rounds)
};

CommSummary comm_accounting(const Trace& trace);

}  // namespace ibopt
