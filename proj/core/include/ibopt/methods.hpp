#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ibopt/blocks.hpp"
#include "ibopt/problems.hpp"
#include "ibopt/prox.hpp"

namespace ibopt {

enum class MethodKind {
  gd,
  cd_shared,
  ibcd,
  ibgd,
  isgd,
  isgd_nonconvex,
  saga,
  isaga_shared,
  isaga_distributed,
  isega,
  iasgd,
  async_isgd,
};

std::string method_name(MethodKind kind);
MethodKind method_from_name(const std::string& name);

// Constant gamma, or gamma^t = 1 / (a + c t).
struct StepsizeSchedule {
  bool decreasing = false;
  double gamma = 0.0;
  double a = 0.0;
  double c = 0.0;

  static StepsizeSchedule constant(double g) { return {false, g, 0.0, 0.0}; }
  static StepsizeSchedule inverse_linear(double a, double c) {
    return {true, a > 0 ? 1.0 / a : 0.0, a, c};
  }
  double at(std::int64_t t) const {
    return decreasing ? 1.0 / (a + c * static_cast<double>(t)) : gamma;
  }
};

struct AccelParams {
  double rho_hat = 1.0;
  double sigma_hat_sq = 0.0;
};

struct DelaySchedule {
  enum class Mode { none, fixed, uniform, adversarial };
  Mode mode = Mode::none;
  int bound = 0;  // M; realized iterate ages stay in [1, max(1, M)]
  std::vector<int> delays;

  static DelaySchedule none_schedule() { return {}; }
  static DelaySchedule fixed(int m);
  static DelaySchedule uniform(int m);
  static DelaySchedule adversarial(std::vector<int> list, int m);

  int max_age() const { return bound < 1 ? 1 : bound; }
  int draw(std::uint64_t master_seed, int worker, std::int64_t round,
           int n_workers) const;
};

struct MethodConfig {
  MethodKind kind = MethodKind::gd;
  int n_workers = 1;
  int m_blocks = 1;
  double tau = 1.0;
  StepsizeSchedule step;
  Regularizer reg;
  StochasticGradSpec stoch{0, 0.0};  // batch_size 0 = exact gradients
  std::optional<AccelParams> accel;
  DelaySchedule delays;
  bool record_lyapunov = false;

  // Checks kind-specific parameter presence and consistency with the problem;
  // throws std::invalid_argument naming the violation.
  void validate(const ProblemInstance& p) const;
};

// Theorem-prescribed default stepsizes per method.
StepsizeSchedule stepsize_default(MethodKind kind, const ProblemInstance& p,
                                  int n, double tau);

// rho_hat = 1 + (rho_t/n)(1/tau - 1 + rho_b/tau),
// sigma_hat^2 = sigma_b^2/(n tau) + (sigma_t^2/n)(1/tau - 1 + rho_b/tau).
std::pair<double, double> strong_growth_params(double rho_tilde,
                                               double sigma_tilde_sq,
                                               double rho_bar,
                                               double sigma_bar_sq, int n,
                                               double tau);

struct StepStats {
  std::int64_t blocks_up = 0;
  std::int64_t blocks_down = 0;
};

// One worker's ISGD proposal from iterate x_read with the (worker, round)
// stream; shared by the synchronous engine and the asynchronous driver so the
// zero-delay reduction is bit-exact.
Vector isgd_proposal(const ProblemInstance& p, const BlockPartition& part,
                     const MethodConfig& cfg, const Vector& x_read, int worker,
                     std::int64_t round, std::uint64_t master_seed,
                     double gamma, StepStats* stats);

// Synchronous one-round state machine for every method; owns worker memories
// (SAGA tables, SEGA h-vectors) and the server iterate.
class Engine {
 public:
  Engine(const ProblemInstance& p, const MethodConfig& cfg, Vector x0,
         std::uint64_t master_seed);

  StepStats step();

  const Vector& iterate() const { return x_; }
  std::int64_t round() const { return t_; }
  const BlockPartition& partition() const { return part_; }

  bool has_weighted_average() const { return cfg_.step.decreasing; }
  Vector weighted_average() const;
  double weighted_average_normalizer() const { return wavg_den_; }

  bool has_lyapunov() const;
  double lyapunov() const;
  double lyapunov_weight() const { return lyap_c_; }

  // SAGA memories, exposed for oracles and audits.
  const std::vector<Vector>& shared_alpha() const { return alpha_; }
  const Vector& shared_abar() const { return abar_; }
  const std::vector<std::vector<Vector>>& worker_alpha() const { return walpha_; }
  const std::vector<Vector>& sega_h() const { return h_; }

  void audit_saga_mean() const;  // throws if abar drifted from the table mean

  // Warm-start the variance-reduction memories with gradients at x.
  void seed_saga_memory_at(const Vector& x);
  void seed_sega_memory_at(const Vector& x);

 private:
  StepStats step_parallel_gradient();  // gd, cd_shared, ibcd, ibgd, isgd
  StepStats step_saga_reference();
  StepStats step_isaga_shared();
  StepStats step_isaga_distributed();
  StepStats step_isega();
  StepStats step_iasgd();

  void accumulate_weighted_average();
  void refresh_lyapunov_memory();

  const ProblemInstance& p_;
  MethodConfig cfg_;
  BlockPartition part_;
  std::uint64_t master_seed_;

  std::int64_t t_ = 0;
  Vector x_;

  // decreasing-schedule weighted average of iterates
  Vector wavg_num_;
  double wavg_den_ = 0.0;

  // SAGA state: shared table (saga, isaga_shared) or per-worker tables
  std::vector<Vector> alpha_;
  Vector abar_;
  std::vector<std::vector<Vector>> walpha_;
  std::vector<Vector> wabar_;

  // SEGA per-worker gradient estimates
  std::vector<Vector> h_;

  // IASGD sequences
  Vector accel_y_;
  Vector accel_x_prev_;
  double accel_eta_ = 0.0;
  double accel_beta_ = 0.0;

  // Lyapunov bookkeeping
  double lyap_c_ = 0.0;
  double lyap_mem_sq_ = 0.0;
  std::vector<Vector> opt_grads_;
  std::int64_t updates_since_audit_ = 0;
};

}  // namespace ibopt
