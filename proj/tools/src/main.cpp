#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "ibopt/experiment.hpp"
#include "ibopt/suites.hpp"

namespace {

using ibopt::KeyValueConfig;

// CLI flags mirror the flat config keys; flags override file values.
struct FlagSet {
  std::vector<std::pair<std::string, std::string*>> slots;
  std::vector<std::unique_ptr<std::string>> storage;

  std::string* slot(const std::string& key) {
    storage.push_back(std::make_unique<std::string>());
    slots.emplace_back(key, storage.back().get());
    return storage.back().get();
  }
};

void add_plan_options(CLI::App* cmd, FlagSet& flags, std::string& config_path) {
  cmd->add_option("--config", config_path, "plan file (flat key = value)");
  auto opt = [&](const std::string& flag, const std::string& key,
                 const std::string& help) {
    cmd->add_option(flag, *flags.slot(key), help);
  };
  opt("--problem", "problem", "quad | logreg");
  opt("--d", "d", "quadratic dimension");
  opt("--inner", "inner", "quadratic inner components per worker");
  opt("--problem-seed", "problem_seed", "quadratic synthesis seed");
  opt("--component-shift", "component_shift", "per-component gradient noise at x*");
  opt("--dataset", "dataset", "LibSVM dataset path");
  opt("--l2", "l2", "logistic l2 regularization");
  opt("--d-override", "d_override", "feature-count override");
  opt("--shard-seed", "shard_seed", "data sharding seed");
  opt("--rounds", "rounds", "rounds per run");
  opt("--seeds", "seeds", "seed count per method");
  opt("--master-seed", "master_seed", "base master seed");
  opt("--out", "out", "output directory");
  opt("--x0", "x0", "auto | zeros | ones | gauss");
  opt("--x0-scale", "x0_scale", "initial point norm scale");
  opt("--method", "method", "method kind");
  opt("--tau", "tau", "fraction of blocks per worker");
  cmd->add_option("--workers,--n", *flags.slot("workers"), "worker count");
  opt("--blocks", "blocks", "block count m (default min(workers, d))");
  opt("--gamma", "gamma", "stepsize, or 'auto' for the theorem default");
  opt("--a", "a", "decreasing schedule offset");
  opt("--c", "c", "decreasing schedule slope");
  opt("--batch-size", "batch_size", "stochastic minibatch size (0 = exact)");
  opt("--reg", "reg", "none | l1 | squared_l2");
  opt("--reg-weight", "reg_weight", "regularizer weight");
  opt("--rho-hat", "rho_hat", "strong-growth rho (number or 'grid')");
  opt("--rho-grid", "rho_grid", "comma list of rho candidates");
  opt("--delay-mode", "delay_mode", "none | fixed | uniform | adversarial");
  opt("--delay-bound", "delay_bound", "delay bound M");
  opt("--delay-list", "delay_list", "comma list of adversarial delays");
  opt("--record-lyapunov", "record_lyapunov", "record the SAGA Lyapunov value");
}

ibopt::ExperimentPlan assemble_plan(const std::string& config_path,
                                    const FlagSet& flags) {
  KeyValueConfig cfg;
  if (!config_path.empty()) cfg = ibopt::load_key_value(config_path);
  for (const auto& [key, value] : flags.slots) {
    if (!value->empty()) cfg.set(key, *value);
  }
  return ibopt::ExperimentPlan::from_config(cfg);
}

int cmd_run(const std::string& config_path, const FlagSet& flags) {
  ibopt::ExperimentPlan plan = assemble_plan(config_path, flags);
  auto results = ibopt::run_plan(plan);
  for (const auto& res : results) {
    std::cout << res.label << ": rounds=" << plan.rounds << " seeds=" << plan.seeds
              << " final_subopt=" << ibopt::format_double(
                     res.traces.front().records.back().subopt);
    if (res.resolved_rho_hat > 0) {
      std::cout << " rho_hat=" << ibopt::format_double(res.resolved_rho_hat);
    }
    std::cout << '\n';
  }
  if (!plan.out_dir.empty()) {
    std::cout << "wrote traces and manifests to " << plan.out_dir << '\n';
  }
  return 0;
}

int cmd_compare(const std::string& config_path, const FlagSet& flags,
                const std::vector<std::string>& csv_files,
                const std::string& metric, const std::string& out_path) {
  std::vector<std::string> labels;
  std::vector<ibopt::Trace> traces;
  if (!config_path.empty()) {
    ibopt::ExperimentPlan plan = assemble_plan(config_path, flags);
    auto results = ibopt::run_plan(plan);
    for (auto& res : results) {
      labels.push_back(res.label);
      traces.push_back(plan.seeds >= 2
                           ? ibopt::mean_trace_to_trace(res.mean, res.traces.front())
                           : res.traces.front());
    }
  } else {
    if (csv_files.empty()) {
      throw std::runtime_error("compare: pass --config or trace CSV files");
    }
    for (const auto& f : csv_files) {
      labels.push_back(std::filesystem::path(f).stem().string());
      traces.push_back(ibopt::read_trace_csv(f));
    }
  }
  if (out_path.empty()) {
    ibopt::write_compare_csv(labels, traces, metric, std::cout);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    ibopt::write_compare_csv(labels, traces, metric, out);
    std::cout << "wrote " << out_path << '\n';
  }
  return 0;
}

int cmd_synth_data(int rows, int d, std::uint64_t seed, int min_nnz, int max_nnz,
                   const std::string& out_path) {
  const ibopt::SparseDataset ds =
      ibopt::synth_sparse_dataset(rows, d, seed, min_nnz, max_nnz);
  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  ibopt::serialize_libsvm(ds, out);
  std::cout << "wrote " << out_path << " rows=" << ds.n_rows << " d=" << ds.d << '\n';
  return 0;
}

int cmd_verify(const std::string& suite) {
  const auto checks = ibopt::run_suite(suite);
  int failed = 0;
  for (const auto& c : checks) {
    nlohmann::json j{{"suite", suite},
                     {"check", c.name},
                     {"measured", c.measured},
                     {"threshold", c.threshold},
                     {"comparator", c.comparator},
                     {"pass", c.pass}};
    if (!c.note.empty()) j["note"] = c.note;
    std::cout << j.dump() << '\n';
    if (!c.pass) ++failed;
  }
  std::cout << (failed == 0 ? "PASS" : "FAIL") << " suite=" << suite << " checks="
            << checks.size() << " failed=" << failed << '\n';
  return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"independent block-sampling distributed optimization testbed"};
  app.require_subcommand(1);

  std::string run_config, cmp_config, cmp_metric = "subopt", cmp_out;
  std::string verify_suite;
  std::vector<std::string> cmp_files;
  FlagSet run_flags, cmp_flags;

  CLI::App* run = app.add_subcommand("run", "run an experiment plan");
  add_plan_options(run, run_flags, run_config);

  CLI::App* cmp = app.add_subcommand(
      "compare", "merge seed-averaged traces into one CSV keyed by method");
  add_plan_options(cmp, cmp_flags, cmp_config);
  cmp->add_option("--metric", cmp_metric, "subopt | dist_sq | grad_sq");
  cmp->add_option("--out-file", cmp_out, "merged CSV destination (default stdout)");
  cmp->add_option("files", cmp_files, "existing trace CSVs to merge");

  CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", verify_suite,
                     "moments | rates | reductions | comm | async")
      ->required();

  int sd_rows = 1600, sd_d = 123, sd_min = 8, sd_max = 18;
  std::uint64_t sd_seed = 12345;
  std::string sd_out = "dataset.libsvm";
  CLI::App* synth = app.add_subcommand(
      "synth-data", "write a deterministic synthetic LibSVM dataset");
  synth->add_option("--rows", sd_rows, "example count");
  synth->add_option("--d", sd_d, "feature count");
  synth->add_option("--seed", sd_seed, "generator seed");
  synth->add_option("--min-nnz", sd_min, "minimum features per row");
  synth->add_option("--max-nnz", sd_max, "maximum features per row");
  synth->add_option("--out-file", sd_out, "destination path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config, run_flags);
    if (cmp->parsed()) return cmd_compare(cmp_config, cmp_flags, cmp_files,
                                          cmp_metric, cmp_out);
    if (verify->parsed()) return cmd_verify(verify_suite);
    if (synth->parsed()) {
      return cmd_synth_data(sd_rows, sd_d, sd_seed, sd_min, sd_max, sd_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
