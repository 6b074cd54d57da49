// Serial reference kernels against the OpenMP kernels on a survey-shaped
// grid. Arguments: N rows; threads for the parallel variants.

#include <benchmark/benchmark.h>

#include <map>

#include "gmr3/kernels.hpp"
#include "gmr3/mm_solver.hpp"
#include "gmr3/simulation.hpp"

namespace {

using namespace gmr3;

struct Fixture {
  ResponseModel model;
  Matrix theta;
  std::vector<Vector> thresholds;
  double sigma2 = 1.0;

  explicit Fixture(Index n) {
    SimData sim = generate_survey(n, 1);
    FitResult f = fit(sim.data, 2);
    model = response_model(sim.data);
    theta = canonical(f.params, apply_scaling(sim.data, f.params.transforms));
    thresholds = f.params.thresholds;
    sigma2 = f.params.sigma2;
  }

  kernels::CellGrid grid() const { return {&model, &theta, &thresholds, sigma2}; }
};

const Fixture& fixture(Index n) {
  static std::map<Index, Fixture> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, Fixture(n)).first;
  return it->second;
}

void BM_NllReference(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  Matrix out(f.theta.rows(), f.theta.cols());
  for (auto _ : state) {
    kernels::reference::cell_nll(f.grid(), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * out.size());
}

void BM_NllParallel(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  kernels::set_max_threads(static_cast<int>(state.range(1)));
  Matrix out(f.theta.rows(), f.theta.cols());
  for (auto _ : state) {
    kernels::cell_nll(f.grid(), out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * out.size());
}

void BM_WorkingReference(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  Matrix z(f.theta.rows(), f.theta.cols());
  for (auto _ : state) {
    kernels::reference::working_response(f.grid(), 0.5, z);
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * z.size());
}

void BM_WorkingParallel(benchmark::State& state) {
  const Fixture& f = fixture(state.range(0));
  kernels::set_max_threads(static_cast<int>(state.range(1)));
  Matrix z(f.theta.rows(), f.theta.cols());
  for (auto _ : state) {
    kernels::working_response(f.grid(), 0.5, z);
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * z.size());
}

}  // namespace

BENCHMARK(BM_NllReference)->Arg(837)->Arg(20000);
BENCHMARK(BM_NllParallel)->ArgsProduct({{837, 20000}, {1, 2, 4}})->UseRealTime();
BENCHMARK(BM_WorkingReference)->Arg(837)->Arg(20000);
BENCHMARK(BM_WorkingParallel)->ArgsProduct({{837, 20000}, {1, 2, 4}})->UseRealTime();

BENCHMARK_MAIN();
