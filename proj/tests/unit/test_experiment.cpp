#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ibopt/experiment.hpp"
#include "test_helpers.hpp"

using namespace ibopt;

namespace {

KeyValueConfig cfg_from(const std::string& text) {
  std::istringstream in(text);
  return parse_key_value(in);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("plan parsing: single method from flat keys") {
  const ExperimentPlan plan = ExperimentPlan::from_config(cfg_from(
      "problem = quad\nd = 12\ninner = 4\nmethod = ibcd\nworkers = 3\n"
      "tau = 0.25\nblocks = 4\nrounds = 30\nseeds = 2\n"));
  CHECK(plan.methods.size() == 1);
  CHECK(plan.methods[0].kind == MethodKind::ibcd);
  CHECK(plan.rounds == 30);
  const ProblemInstance p = plan.problem.build(plan.methods[0].workers);
  const MethodConfig mc = plan.methods[0].resolve(p);
  CHECK(mc.m_blocks == 4);
  CHECK(mc.step.gamma ==
        doctest::Approx(stepsize_default(MethodKind::ibcd, p, 3, 0.25).gamma));
}

TEST_CASE("plan parsing: errors name the offending key") {
  CHECK_THROWS_WITH_AS(
      ExperimentPlan::from_config(cfg_from("problem = quad\nmethod = ibcd\n"
                                           "workres = 3\n")),
      doctest::Contains("workres"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      ExperimentPlan::from_config(cfg_from("problem = quad\nrounds = 5\n")),
      doctest::Contains("missing required key: method"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      ExperimentPlan::from_config(cfg_from(
          "problem = quad\nmethods = a,b\na.method = gd\nb.method = gd\n"
          "c.method = gd\n")),
      doctest::Contains("label 'c'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(
      ExperimentPlan::from_config(cfg_from("problem = logreg\nmethod = gd\n")),
      doctest::Contains("dataset"), std::runtime_error);
}

TEST_CASE("labelled multi-method plans parse independently") {
  const ExperimentPlan plan = ExperimentPlan::from_config(cfg_from(
      "problem = quad\nd = 10\ninner = 3\nrounds = 20\n"
      "methods = fast,slow\n"
      "fast.method = gd\nfast.workers = 2\n"
      "slow.method = ibcd\nslow.workers = 2\nslow.tau = 0.5\nslow.blocks = 2\n"));
  REQUIRE(plan.methods.size() == 2);
  CHECK(plan.methods[0].label == "fast");
  CHECK(plan.methods[1].tau == 0.5);
}

TEST_CASE("golden configs parse and validate") {
  for (const std::string name : {"saga_scaling.cfg", "sega_n_tau_1.cfg"}) {
    const KeyValueConfig kv =
        load_key_value(test_helpers::config_dir() + "/" + name);
    const ExperimentPlan plan = ExperimentPlan::from_config(kv);
    CHECK(plan.methods.size() >= 4);
    CHECK(plan.rounds > 1000);
  }
}

TEST_CASE("manifest reruns reproduce traces bit-exactly") {
  namespace fs = std::filesystem;
  const fs::path dir1 = fs::temp_directory_path() / "ibopt_manifest_a";
  const fs::path dir2 = fs::temp_directory_path() / "ibopt_manifest_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);

  ExperimentPlan plan = ExperimentPlan::from_config(cfg_from(
      "problem = quad\nd = 10\ninner = 3\nproblem_seed = 4\nmethod = ibcd\n"
      "workers = 2\ntau = 0.5\nblocks = 2\nrounds = 25\nseeds = 2\n"
      "master_seed = 11\n"));
  plan.out_dir = dir1.string();
  run_plan(plan);

  const KeyValueConfig manifest = load_key_value((dir1 / "run_manifest.cfg").string());
  // every number entering the run is present
  for (const std::string key : {"gamma", "blocks", "info_L", "info_mu"}) {
    CHECK(manifest.has(key));
  }
  ExperimentPlan replay = ExperimentPlan::from_config(manifest);
  replay.out_dir = dir2.string();
  run_plan(replay);

  CHECK(slurp((dir1 / "run_seed0.csv").string()) ==
        slurp((dir2 / "run_seed0.csv").string()));
  CHECK(slurp((dir1 / "run_seed1.csv").string()) ==
        slurp((dir2 / "run_seed1.csv").string()));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("compare merges aligned traces and rejects mismatched grids") {
  const ProblemInstance p = quadratic_synthesize(10, 2, 3, 5);
  MethodConfig gd;
  gd.kind = MethodKind::gd;
  gd.n_workers = 2;
  gd.m_blocks = 2;
  gd.step = stepsize_default(MethodKind::gd, p, 2, 1.0);
  MethodConfig ibcd = gd;
  ibcd.kind = MethodKind::ibcd;
  ibcd.tau = 1.0;

  const Vector x0 = make_x0(p, "ones", 5.0, 1);
  const Trace a = run_synchronous(p, gd, x0, 30, 3);
  const Trace b = run_synchronous(p, ibcd, x0, 30, 3);

  std::ostringstream out;
  write_compare_csv({"gd", "ibcd"}, {a, b}, "subopt", out);
  std::istringstream lines(out.str());
  std::string header;
  std::getline(lines, header);
  CHECK(header == "round,gd,ibcd");
  std::string row;
  while (std::getline(lines, row)) {
    const auto c1 = row.find(',');
    const auto c2 = row.find(',', c1 + 1);
    CHECK(row.substr(c1 + 1, c2 - c1 - 1) == row.substr(c2 + 1));
  }

  const Trace shorter = run_synchronous(p, gd, x0, 29, 3);
  std::ostringstream sink;
  CHECK_THROWS_WITH_AS(write_compare_csv({"a", "b"}, {a, shorter}, "subopt", sink),
                       doctest::Contains("mismatched round grids"),
                       std::runtime_error);
}

TEST_CASE("x0 modes") {
  const ProblemInstance p = quadratic_synthesize(9, 2, 3, 6);
  CHECK(make_x0(p, "zeros", 5, 1).norm() == 0.0);
  CHECK(make_x0(p, "ones", 6, 1).norm() == doctest::Approx(6.0));
  CHECK(make_x0(p, "gauss", 2.5, 1).norm() == doctest::Approx(2.5));
  CHECK(make_x0(p, "auto", 5, 1).norm() == doctest::Approx(5.0));  // quad: ones
  CHECK_THROWS_AS(make_x0(p, "bogus", 5, 1), std::runtime_error);
}
