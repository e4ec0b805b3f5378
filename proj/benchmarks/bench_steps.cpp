#include <benchmark/benchmark.h>

#include <sstream>

#include "ibopt/data_io.hpp"
#include "ibopt/methods.hpp"
#include "ibopt/simulator.hpp"

using namespace ibopt;

namespace {

MethodConfig make_cfg(MethodKind kind, const ProblemInstance& p, int m, double tau) {
  MethodConfig cfg;
  cfg.kind = kind;
  cfg.n_workers = kind == MethodKind::saga ? 1 : p.n_workers();
  cfg.m_blocks = m;
  cfg.tau = tau;
  cfg.step = stepsize_default(kind, p, cfg.n_workers, tau);
  return cfg;
}

void BM_MaskRound(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const BlockPartition part = partition_uniform(d, d / 4);
  Vector x = Vector::Ones(d);
  Rng rng(1);
  for (auto _ : state) {
    const BlockSample s = sample_subset(part, 0.25, rng);
    benchmark::DoNotOptimize(mask(x, s));
  }
}
BENCHMARK(BM_MaskRound)->Arg(128)->Arg(1024)->Arg(8192);

void BM_IbcdRound(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ProblemInstance p = quadratic_synthesize(100, n, 20, 1);
  MethodConfig cfg = make_cfg(MethodKind::ibcd, p, std::min(n, 100), 1.0 / std::min(n, 100));
  Engine eng(p, cfg, Vector::Ones(100), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eng.step());
  }
}
BENCHMARK(BM_IbcdRound)->Arg(5)->Arg(30)->Arg(100);

void BM_IsagaSharedRound(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const ProblemInstance p = quadratic_synthesize(64, n, 16, 2);
  MethodConfig cfg = make_cfg(MethodKind::isaga_shared, p, 32, 1.0 / 32);
  Engine eng(p, cfg, Vector::Ones(64), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eng.step());
  }
}
BENCHMARK(BM_IsagaSharedRound)->Arg(4)->Arg(32);

void BM_ParseLibsvm(benchmark::State& state) {
  const SparseDataset ds = synth_sparse_dataset(2000, 128, 3);
  std::ostringstream text;
  serialize_libsvm(ds, text);
  const std::string payload = text.str();
  for (auto _ : state) {
    std::istringstream in(payload);
    benchmark::DoNotOptimize(parse_libsvm(in));
  }
}
BENCHMARK(BM_ParseLibsvm);

}  // namespace

BENCHMARK_MAIN();
