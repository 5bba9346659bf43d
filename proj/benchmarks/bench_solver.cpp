#include <benchmark/benchmark.h>

#include "egap/chain_inference.hpp"
#include "egap/egap_solver.hpp"
#include "egap/expgrad.hpp"
#include "egap/generate.hpp"

namespace {

egap::Problem problem_with(std::size_t sequences) {
  egap::GeneratorConfig config = egap::reference_config();
  config.num_sequences = sequences;
  return egap::build_problem(egap::generate_dataset(config), egap::kReferenceLambda);
}

void BM_ExplicitStep(benchmark::State& st) {
  const egap::Problem p = problem_with(static_cast<std::size_t>(st.range(0)));
  const egap::ExplicitSolver solver(p);
  auto state = solver.initialize();
  for (auto _ : st) {
    solver.step(state);
    benchmark::DoNotOptimize(state.w_norm_sq);
  }
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_ExplicitStep)->RangeMultiplier(2)->Range(50, 800)->Complexity();

void BM_KernelStep(benchmark::State& st) {
  const egap::Problem p = problem_with(static_cast<std::size_t>(st.range(0)));
  const egap::KernelSolver solver(p);
  auto state = solver.initialize();
  for (auto _ : st) {
    solver.step(state);
    benchmark::DoNotOptimize(state.w_norm_sq);
  }
  st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_KernelStep)->RangeMultiplier(2)->Range(50, 800)->Complexity(benchmark::oNSquared);

void BM_Evaluate(benchmark::State& st) {
  const egap::Problem p = problem_with(static_cast<std::size_t>(st.range(0)));
  const egap::ExplicitSolver solver(p);
  auto state = solver.initialize();
  for (auto _ : st) {
    state.evaluated = false;
    solver.evaluate(state);
    benchmark::DoNotOptimize(state.primal);
  }
}
BENCHMARK(BM_Evaluate)->Arg(100)->Arg(400);

void BM_ExpGradToTolerance(benchmark::State& st) {
  const egap::Problem p = egap::reference_problem();
  const egap::ExplicitBackend backend(p);
  for (auto _ : st) {
    auto result = egap::expgrad_run(backend, {.epsilon = 1e-2});
    benchmark::DoNotOptimize(result.dual);
  }
}
BENCHMARK(BM_ExpGradToTolerance)->Unit(benchmark::kMillisecond);

void BM_EgapToTolerance(benchmark::State& st) {
  const egap::Problem p = egap::reference_problem();
  const egap::ExplicitSolver solver(p);
  for (auto _ : st) {
    auto result = solver.run({.epsilon = 1e-3});
    benchmark::DoNotOptimize(result.state.dual);
  }
}
BENCHMARK(BM_EgapToTolerance)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
