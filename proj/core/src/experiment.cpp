#include "ibopt/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ibopt {

namespace {

const std::set<std::string> kGlobalKeys = {
    "problem", "d", "inner", "problem_seed", "component_shift", "dataset",
    "l2", "d_override", "shard_seed", "ref_tol", "rounds", "seeds",
    "master_seed", "out", "x0", "x0_scale", "methods"};

const std::set<std::string> kMethodKeys = {
    "method", "tau", "workers", "blocks", "gamma", "a", "c", "batch_size",
    "reg", "reg_weight", "rho_hat", "rho_grid", "delay_mode", "delay_bound",
    "delay_list", "record_lyapunov"};

double to_number(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config key '" + key + "': bad number '" + v + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  const double d = to_number(key, v);
  const auto i = static_cast<std::int64_t>(d);
  if (static_cast<double>(i) != d) {
    throw std::runtime_error("config key '" + key + "': expected integer, got " + v);
  }
  return i;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::runtime_error("config key '" + key + "': expected boolean, got " + v);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void apply_method_key(MethodSpec& ms, const std::string& key,
                      const std::string& value) {
  if (key == "method") {
    ms.kind = method_from_name(value);
  } else if (key == "tau") {
    ms.tau = to_number(key, value);
  } else if (key == "workers") {
    ms.workers = static_cast<int>(to_int(key, value));
  } else if (key == "blocks") {
    ms.blocks = static_cast<int>(to_int(key, value));
  } else if (key == "gamma") {
    if (value == "auto") {
      ms.gamma_auto = true;
    } else {
      ms.gamma_auto = false;
      ms.gamma = to_number(key, value);
    }
  } else if (key == "a") {
    ms.has_schedule = true;
    ms.sched_a = to_number(key, value);
  } else if (key == "c") {
    ms.has_schedule = true;
    ms.sched_c = to_number(key, value);
  } else if (key == "batch_size") {
    ms.batch_size = static_cast<int>(to_int(key, value));
  } else if (key == "reg") {
    if (value != "none" && value != "l1" && value != "squared_l2") {
      throw std::runtime_error("config key 'reg': expected none|l1|squared_l2");
    }
    ms.reg_kind = value;
  } else if (key == "reg_weight") {
    ms.reg_weight = to_number(key, value);
  } else if (key == "rho_hat") {
    if (value == "grid") {
      ms.rho_grid_search = true;
    } else {
      ms.rho_hat = to_number(key, value);
    }
  } else if (key == "rho_grid") {
    for (const auto& tok : split_list(value)) ms.rho_grid.push_back(to_number(key, tok));
  } else if (key == "delay_mode") {
    if (value != "none" && value != "fixed" && value != "uniform" &&
        value != "adversarial") {
      throw std::runtime_error("config key 'delay_mode': unknown mode " + value);
    }
    ms.delay_mode = value;
  } else if (key == "delay_bound") {
    ms.delay_bound = static_cast<int>(to_int(key, value));
  } else if (key == "delay_list") {
    for (const auto& tok : split_list(value)) {
      ms.delay_list.push_back(static_cast<int>(to_int(key, tok)));
    }
  } else if (key == "record_lyapunov") {
    ms.record_lyapunov = to_bool(key, value);
  } else {
    throw std::runtime_error("unknown config key: " + key);
  }
}

}  // namespace

ProblemInstance ProblemSpec::build(int n_workers) const {
  if (kind == Kind::quad) {
    return quadratic_synthesize(d, n_workers, inner, problem_seed, component_shift);
  }
  SparseDataset ds = load_libsvm(dataset_path, d_override);
  ds = normalize_rows(ds);
  auto shards = partition_data(ds, n_workers, shard_seed);
  return logreg_build(ds, l2, shards, ref_tol);
}

MethodConfig MethodSpec::resolve(const ProblemInstance& p) const {
  MethodConfig cfg;
  cfg.kind = kind;
  cfg.n_workers = workers;
  cfg.m_blocks = blocks > 0 ? blocks : std::min(workers, p.dim());
  cfg.tau = tau;
  if (kind == MethodKind::gd || kind == MethodKind::saga) cfg.tau = 1.0;

  if (has_schedule) {
    cfg.step = StepsizeSchedule::inverse_linear(sched_a, sched_c);
  } else if (!gamma_auto) {
    cfg.step = StepsizeSchedule::constant(gamma);
  } else if (kind == MethodKind::iasgd) {
    const double rho = rho_hat > 0 ? rho_hat : 1.0;
    cfg.step = StepsizeSchedule::constant(1.0 / (rho * p.smoothness()));
  } else {
    cfg.step = stepsize_default(kind, p, workers, cfg.tau);
  }

  cfg.stoch.batch_size = batch_size;
  if (reg_kind == "l1") {
    cfg.reg = Regularizer::l1(reg_weight);
  } else if (reg_kind == "squared_l2") {
    cfg.reg = Regularizer::squared_l2(reg_weight);
  }

  if (kind == MethodKind::iasgd) {
    AccelParams ap;
    ap.rho_hat = rho_hat > 0 ? rho_hat : 0.0;
    cfg.accel = ap;
  }

  if (delay_mode == "fixed") {
    cfg.delays = DelaySchedule::fixed(delay_bound);
  } else if (delay_mode == "uniform") {
    cfg.delays = DelaySchedule::uniform(delay_bound);
  } else if (delay_mode == "adversarial") {
    cfg.delays = DelaySchedule::adversarial(delay_list, delay_bound);
  }

  cfg.record_lyapunov = record_lyapunov;
  return cfg;
}

ExperimentPlan ExperimentPlan::from_config(const KeyValueConfig& cfg) {
  ExperimentPlan plan;
  std::vector<std::string> labels;
  if (cfg.has("methods")) {
    labels = split_list(cfg.get("methods"));
    if (labels.empty()) throw std::runtime_error("config key 'methods' lists no labels");
  }

  // Key validation pass.
  for (const auto& [key, value] : cfg.entries) {
    if (key.rfind("info_", 0) == 0) continue;  // manifest annotations
    const auto dot = key.find('.');
    if (dot != std::string::npos) {
      const std::string prefix = key.substr(0, dot);
      const std::string suffix = key.substr(dot + 1);
      if (std::find(labels.begin(), labels.end(), prefix) == labels.end()) {
        throw std::runtime_error("unknown config key: " + key +
                                 " (label '" + prefix + "' not declared in 'methods')");
      }
      if (!kMethodKeys.count(suffix)) {
        throw std::runtime_error("unknown config key: " + key);
      }
    } else if (!kGlobalKeys.count(key) && !kMethodKeys.count(key)) {
      throw std::runtime_error("unknown config key: " + key);
    }
  }

  const std::string pkind = cfg.get_or("problem", "quad");
  if (pkind == "quad") {
    plan.problem.kind = ProblemSpec::Kind::quad;
  } else if (pkind == "logreg") {
    plan.problem.kind = ProblemSpec::Kind::logreg;
  } else {
    throw std::runtime_error("config key 'problem': expected quad|logreg");
  }
  if (cfg.has("d")) plan.problem.d = static_cast<int>(to_int("d", cfg.get("d")));
  if (cfg.has("inner")) {
    plan.problem.inner = static_cast<int>(to_int("inner", cfg.get("inner")));
  }
  if (cfg.has("problem_seed")) {
    plan.problem.problem_seed =
        static_cast<std::uint64_t>(to_int("problem_seed", cfg.get("problem_seed")));
  }
  if (cfg.has("component_shift")) {
    plan.problem.component_shift =
        to_number("component_shift", cfg.get("component_shift"));
  }
  if (cfg.has("dataset")) plan.problem.dataset_path = cfg.get("dataset");
  if (cfg.has("l2")) plan.problem.l2 = to_number("l2", cfg.get("l2"));
  if (cfg.has("d_override")) {
    plan.problem.d_override = static_cast<int>(to_int("d_override", cfg.get("d_override")));
  }
  if (cfg.has("shard_seed")) {
    plan.problem.shard_seed =
        static_cast<std::uint64_t>(to_int("shard_seed", cfg.get("shard_seed")));
  }
  if (cfg.has("ref_tol")) plan.problem.ref_tol = to_number("ref_tol", cfg.get("ref_tol"));
  if (plan.problem.kind == ProblemSpec::Kind::logreg &&
      plan.problem.dataset_path.empty()) {
    throw std::runtime_error("missing required key: dataset");
  }

  if (cfg.has("rounds")) plan.rounds = to_int("rounds", cfg.get("rounds"));
  if (cfg.has("seeds")) plan.seeds = static_cast<int>(to_int("seeds", cfg.get("seeds")));
  if (cfg.has("master_seed")) {
    plan.master_seed =
        static_cast<std::uint64_t>(to_int("master_seed", cfg.get("master_seed")));
  }
  plan.out_dir = cfg.get_or("out", "");
  plan.x0_mode = cfg.get_or("x0", "auto");
  if (cfg.has("x0_scale")) plan.x0_scale = to_number("x0_scale", cfg.get("x0_scale"));

  if (labels.empty()) {
    MethodSpec ms;
    ms.label = "run";
    ms.kind = method_from_name(cfg.get("method"));  // required
    for (const auto& [key, value] : cfg.entries) {
      if (kMethodKeys.count(key)) apply_method_key(ms, key, value);
    }
    plan.methods.push_back(std::move(ms));
  } else {
    for (const auto& label : labels) {
      MethodSpec ms;
      ms.label = label;
      bool has_method = false;
      for (const auto& [key, value] : cfg.entries) {
        const std::string prefix = label + ".";
        if (key.rfind(prefix, 0) == 0) {
          const std::string suffix = key.substr(prefix.size());
          if (suffix == "method") has_method = true;
          apply_method_key(ms, suffix, value);
        }
      }
      if (!has_method) {
        throw std::runtime_error("missing required key: " + label + ".method");
      }
      plan.methods.push_back(std::move(ms));
    }
  }
  plan.validate();
  return plan;
}

void ExperimentPlan::validate() const {
  if (methods.empty()) throw std::runtime_error("plan needs at least one method");
  if (rounds < 1) throw std::runtime_error("plan needs rounds >= 1");
  if (seeds < 1) throw std::runtime_error("plan needs seeds >= 1");
  std::set<std::string> seen;
  for (const auto& ms : methods) {
    if (!seen.insert(ms.label).second) {
      throw std::runtime_error("duplicate method label: " + ms.label);
    }
  }
}

Vector make_x0(const ProblemInstance& p, const std::string& mode, double scale,
               std::uint64_t seed) {
  std::string m = mode;
  if (m == "auto") {
    m = p.kind() == ProblemKind::quadratic ? "ones" : "zeros";
  }
  const int d = p.dim();
  if (m == "zeros") return Vector::Zero(d);
  if (m == "ones") {
    return Vector::Constant(d, scale / std::sqrt(static_cast<double>(d)));
  }
  if (m == "gauss") {
    Rng rng = Rng::stream(seed, 0x58a11u, 0, StreamKind::problem);
    Vector x(d);
    for (int i = 0; i < d; ++i) x[i] = rng.normal();
    x *= scale / x.norm();
    return x;
  }
  throw std::runtime_error("config key 'x0': expected auto|zeros|ones|gauss");
}

namespace {

MeanTrace mean_of_traces(const std::vector<Trace>& traces) {
  MeanTrace mt;
  mt.n_seeds = static_cast<int>(traces.size());
  const std::size_t n = traces.front().records.size();
  mt.rounds.reserve(n);
  for (const auto& r : traces.front().records) mt.rounds.push_back(r.round);
  auto mean_se = [&](auto&& get, std::vector<double>& mean, std::vector<double>& se) {
    mean.assign(n, 0.0);
    std::vector<double> m2(n, 0.0);
    int k = 0;
    for (const auto& tr : traces) {
      ++k;
      for (std::size_t i = 0; i < n; ++i) {
        const double v = get(tr, i);
        const double d0 = v - mean[i];
        mean[i] += d0 / k;
        m2[i] += d0 * (v - mean[i]);
      }
    }
    se.assign(n, 0.0);
    if (k > 1) {
      for (std::size_t i = 0; i < n; ++i) {
        se[i] = std::sqrt(std::max(0.0, m2[i]) / (static_cast<double>(k - 1) * k));
      }
    }
  };
  mean_se([](const Trace& t, std::size_t i) { return t.records[i].subopt; },
          mt.subopt_mean, mt.subopt_se);
  mean_se([](const Trace& t, std::size_t i) { return t.records[i].dist_sq; },
          mt.dist_mean, mt.dist_se);
  mean_se([](const Trace& t, std::size_t i) { return t.records[i].grad_sq; },
          mt.grad_mean, mt.grad_se);
  if (traces.front().records.front().lyapunov.has_value()) {
    mean_se([](const Trace& t, std::size_t i) { return *t.records[i].lyapunov; },
            mt.lyapunov_mean, mt.lyapunov_se);
  }
  if (!traces.front().subopt_weighted_avg.empty()) {
    mean_se([](const Trace& t, std::size_t i) { return t.subopt_weighted_avg[i]; },
            mt.subopt_wavg_mean, mt.subopt_wavg_se);
  }
  return mt;
}

double final_mean_subopt(const std::vector<Trace>& traces) {
  double s = 0;
  for (const auto& t : traces) s += t.records.back().subopt;
  return s / traces.size();
}

std::vector<Trace> run_cell(const ProblemInstance& p, const MethodConfig& cfg,
                            const Vector& x0, const ExperimentPlan& plan) {
  std::vector<Trace> traces;
  traces.reserve(plan.seeds);
  for (int k = 0; k < plan.seeds; ++k) {
    const std::uint64_t seed = seed_for_replica(plan.master_seed, k);
    traces.push_back(cfg.kind == MethodKind::async_isgd
                         ? run_asynchronous(p, cfg, x0, plan.rounds, cfg.delays, seed)
                         : run_synchronous(p, cfg, x0, plan.rounds, seed));
  }
  return traces;
}

}  // namespace

std::vector<MethodRunResult> run_plan(const ExperimentPlan& plan) {
  plan.validate();
  std::vector<MethodRunResult> results;
  std::map<int, ProblemInstance> problem_cache;

  for (const auto& ms : plan.methods) {
    auto it = problem_cache.find(ms.workers);
    if (it == problem_cache.end()) {
      it = problem_cache.emplace(ms.workers, plan.problem.build(ms.workers)).first;
    }
    const ProblemInstance& p = it->second;
    const Vector x0 = make_x0(p, plan.x0_mode, plan.x0_scale, plan.master_seed);

    MethodRunResult res;
    res.label = ms.label;
    res.problem = p;

    if (ms.rho_grid_search) {
      if (ms.kind != MethodKind::iasgd) {
        throw std::runtime_error("rho_hat grid search applies to iasgd only");
      }
      if (ms.rho_grid.empty()) {
        throw std::runtime_error("rho_hat = grid needs a non-empty rho_grid");
      }
      double best_score = 0;
      bool first = true;
      for (double cand : ms.rho_grid) {
        MethodSpec trial = ms;
        trial.rho_grid_search = false;
        trial.rho_hat = cand;
        MethodConfig cfg = trial.resolve(p);
        auto traces = run_cell(p, cfg, x0, plan);
        const double score = final_mean_subopt(traces);
        if (first || score < best_score) {
          first = false;
          best_score = score;
          res.config = cfg;
          res.traces = std::move(traces);
          res.resolved_rho_hat = cand;
        }
      }
    } else {
      res.config = ms.resolve(p);
      res.traces = run_cell(p, res.config, x0, plan);
      res.resolved_rho_hat = ms.rho_hat;
    }

    if (plan.seeds >= 2) res.mean = mean_of_traces(res.traces);

    if (!plan.out_dir.empty()) {
      std::filesystem::create_directories(plan.out_dir);
      for (int k = 0; k < plan.seeds; ++k) {
        write_trace_csv(res.traces[k], plan.out_dir + "/" + ms.label + "_seed" +
                                           std::to_string(k) + ".csv");
      }
      const Trace avg = plan.seeds >= 2
                            ? mean_trace_to_trace(res.mean, res.traces.front())
                            : res.traces.front();
      write_trace_csv(avg, plan.out_dir + "/" + ms.label + "_mean.csv");
      KeyValueConfig manifest = manifest_for(plan, ms, res);
      std::ofstream mf(plan.out_dir + "/" + ms.label + "_manifest.cfg");
      if (!mf) throw std::runtime_error("cannot write manifest for " + ms.label);
      write_key_value(manifest, mf);
    }
    results.push_back(std::move(res));
  }
  return results;
}

KeyValueConfig manifest_for(const ExperimentPlan& plan, const MethodSpec& ms,
                            const MethodRunResult& result) {
  const ProblemInstance& p = result.problem;
  const MethodConfig& cfg = result.config;
  KeyValueConfig m;
  m.set("problem", plan.problem.kind == ProblemSpec::Kind::quad ? "quad" : "logreg");
  if (plan.problem.kind == ProblemSpec::Kind::quad) {
    m.set("d", std::to_string(plan.problem.d));
    m.set("inner", std::to_string(plan.problem.inner));
    m.set("problem_seed", std::to_string(plan.problem.problem_seed));
    m.set("component_shift", format_double(plan.problem.component_shift));
  } else {
    m.set("dataset", plan.problem.dataset_path);
    m.set("l2", format_double(plan.problem.l2));
    if (plan.problem.d_override > 0) {
      m.set("d_override", std::to_string(plan.problem.d_override));
    }
    m.set("shard_seed", std::to_string(plan.problem.shard_seed));
    m.set("ref_tol", format_double(plan.problem.ref_tol));
  }
  m.set("rounds", std::to_string(plan.rounds));
  m.set("seeds", std::to_string(plan.seeds));
  m.set("master_seed", std::to_string(plan.master_seed));
  std::string x0 = plan.x0_mode;
  if (x0 == "auto") x0 = p.kind() == ProblemKind::quadratic ? "ones" : "zeros";
  m.set("x0", x0);
  m.set("x0_scale", format_double(plan.x0_scale));

  m.set("method", method_name(cfg.kind));
  m.set("workers", std::to_string(cfg.n_workers));
  m.set("blocks", std::to_string(cfg.m_blocks));
  m.set("tau", format_double(cfg.tau));
  if (cfg.step.decreasing) {
    m.set("a", format_double(cfg.step.a));
    m.set("c", format_double(cfg.step.c));
  } else {
    m.set("gamma", format_double(cfg.step.gamma));
  }
  m.set("batch_size", std::to_string(cfg.stoch.batch_size));
  if (!cfg.reg.is_zero()) {
    m.set("reg", cfg.reg.kind == RegKind::l1 ? "l1" : "squared_l2");
    m.set("reg_weight", format_double(cfg.reg.weight));
  }
  if (cfg.accel) m.set("rho_hat", format_double(cfg.accel->rho_hat));
  if (cfg.kind == MethodKind::async_isgd) {
    switch (cfg.delays.mode) {
      case DelaySchedule::Mode::none: m.set("delay_mode", "none"); break;
      case DelaySchedule::Mode::fixed: m.set("delay_mode", "fixed"); break;
      case DelaySchedule::Mode::uniform: m.set("delay_mode", "uniform"); break;
      case DelaySchedule::Mode::adversarial: m.set("delay_mode", "adversarial"); break;
    }
    m.set("delay_bound", std::to_string(cfg.delays.bound));
    if (!cfg.delays.delays.empty()) {
      std::ostringstream list;
      for (std::size_t i = 0; i < cfg.delays.delays.size(); ++i) {
        if (i) list << ',';
        list << cfg.delays.delays[i];
      }
      m.set("delay_list", list.str());
    }
  }
  if (cfg.record_lyapunov) m.set("record_lyapunov", "1");

  // Informational: every derived number entering the run.
  m.set("info_method_label", ms.label);
  m.set("info_L", format_double(p.smoothness()));
  m.set("info_mu", format_double(p.strong_convexity()));
  m.set("info_dim", std::to_string(p.dim()));
  m.set("info_global_components", std::to_string(p.global_count()));
  m.set("info_f_star", format_double(p.f_star()));
  m.set("info_x_star_norm", format_double(p.x_star().norm()));
  if (result.resolved_rho_hat > 0) {
    m.set("info_rho_hat_selected", format_double(result.resolved_rho_hat));
  }
  return m;
}

void write_compare_csv(const std::vector<std::string>& labels,
                       const std::vector<Trace>& traces,
                       const std::string& metric, std::ostream& out) {
  if (labels.size() != traces.size() || traces.empty()) {
    throw std::invalid_argument("compare: need one label per trace");
  }
  const auto& base = traces.front().records;
  for (const auto& tr : traces) {
    if (tr.records.size() != base.size()) {
      throw std::runtime_error("compare: mismatched round grids");
    }
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (tr.records[i].round != base[i].round) {
        throw std::runtime_error("compare: mismatched round grids");
      }
    }
  }
  auto pick = [&](const TraceRecord& r) {
    if (metric == "subopt") return r.subopt;
    if (metric == "dist_sq") return r.dist_sq;
    if (metric == "grad_sq") return r.grad_sq;
    throw std::runtime_error("compare: metric must be subopt|dist_sq|grad_sq");
  };
  out << "round";
  for (const auto& l : labels) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < base.size(); ++i) {
    out << base[i].round;
    for (const auto& tr : traces) out << ',' << format_double(pick(tr.records[i]));
    out << '\n';
  }
}

}  // namespace ibopt
