#pragma once

#include <map>
#include <string>
#include <vector>

#include "ibopt/data_io.hpp"
#include "ibopt/simulator.hpp"

namespace ibopt {

struct ProblemSpec {
  enum class Kind { quad, logreg };
  Kind kind = Kind::quad;

  // quad: worker count comes from each method cell
  int d = 100;
  int inner = 20;
  std::uint64_t problem_seed = 1;
  double component_shift = 0.0;

  // logreg
  std::string dataset_path;
  double l2 = 0.00025;
  int d_override = 0;
  std::uint64_t shard_seed = 0;
  double ref_tol = 1e-12;

  ProblemInstance build(int n_workers) const;
};

struct MethodSpec {
  std::string label;
  MethodKind kind = MethodKind::gd;
  int workers = 1;
  int blocks = 0;  // 0: min(workers, d)
  double tau = 1.0;

  bool gamma_auto = true;
  double gamma = 0.0;
  bool has_schedule = false;
  double sched_a = 0.0, sched_c = 0.0;

  int batch_size = 0;
  std::string reg_kind = "none";
  double reg_weight = 0.0;

  bool rho_grid_search = false;
  double rho_hat = 0.0;  // 0: not set
  std::vector<double> rho_grid;

  std::string delay_mode = "none";
  int delay_bound = 0;
  std::vector<int> delay_list;

  bool record_lyapunov = false;

  // Fills gamma / schedule defaults from the problem constants.
  MethodConfig resolve(const ProblemInstance& p) const;
};

struct ExperimentPlan {
  ProblemSpec problem;
  std::vector<MethodSpec> methods;
  std::int64_t rounds = 100;
  int seeds = 1;
  std::uint64_t master_seed = 1;
  std::string out_dir;
  std::string x0_mode = "auto";  // auto | zeros | ones | gauss
  double x0_scale = 5.0;

  static ExperimentPlan from_config(const KeyValueConfig& cfg);
  void validate() const;
};

Vector make_x0(const ProblemInstance& p, const std::string& mode, double scale,
               std::uint64_t seed);

struct MethodRunResult {
  std::string label;
  ProblemInstance problem;  // the instance this cell ran on
  MethodConfig config;
  std::vector<Trace> traces;  // one per seed
  MeanTrace mean;             // seeds >= 2 only
  double resolved_rho_hat = 0.0;
};

// Runs every (method, seed) cell; when out_dir is non-empty also writes
// per-seed CSVs, the seed-averaged CSV and a re-runnable manifest per label.
std::vector<MethodRunResult> run_plan(const ExperimentPlan& plan);

KeyValueConfig manifest_for(const ExperimentPlan& plan, const MethodSpec& ms,
                            const MethodRunResult& result);

// Column-aligned merge of one metric across labelled traces.
void write_compare_csv(const std::vector<std::string>& labels,
                       const std::vector<Trace>& traces,
                       const std::string& metric, std::ostream& out);

}  // namespace ibopt
