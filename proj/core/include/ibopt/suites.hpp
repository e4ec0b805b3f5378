#pragma once

#include <string>
#include <vector>

namespace ibopt {

// One verification check: `measured` compared against `threshold` with the
// stated comparator ("<=", ">=", "==", "in"); `note` carries context.
struct CheckResult {
  std::string name;
  double measured = 0;
  double threshold = 0;
  std::string comparator;
  bool pass = false;
  std::string note;
};

// Moment identities: enumeration-based mean and variance of the aggregated
// block-gradient update against the closed forms, every (m, tau m, n) cell.
std::vector<CheckResult> suite_moments();

// Contraction envelopes and stepsize-bound rejection for the linear-rate
// theorems on the synthetic quadratic benchmark.
std::vector<CheckResult> suite_rates();

// Byte-identical reductions: block CD at tau=1 vs gradient descent, and
// single-worker shared-memory SAGA vs the reference SAGA.
std::vector<CheckResult> suite_reductions();

// Communication accounting: exact savings ratio, fitted-rate ratio window,
// and the Bernoulli traffic mean.
std::vector<CheckResult> suite_comm();

// Asynchronous soundness: zero-delay trace equality, bounded ages, epoch
// bound, and the per-epoch contraction envelope.
std::vector<CheckResult> suite_async();

std::vector<CheckResult> run_suite(const std::string& name);

bool all_passed(const std::vector<CheckResult>& checks);

}  // namespace ibopt
