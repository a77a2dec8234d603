#include <benchmark/benchmark.h>

#include "paikit/control.hpp"
#include "paikit/initial_data.hpp"
#include "paikit/inversion.hpp"
#include "paikit/random.hpp"
#include "paikit/wave_dirichlet.hpp"
#include "paikit/wave_forward.hpp"

using namespace paikit;

namespace {

Domain disk(int res) { return Domain::disk({0.5, 0.5, 0.0}, 0.5, 2, res); }

StarInclusion inclusion() { return StarInclusion(2, {0.5, 0.5, 0.0}, {0.2, 0.0, 0.0, 0.03, 0.0}, 0.05); }

void BM_ForwardRun(benchmark::State& state) {
  Domain d = disk(static_cast<int>(state.range(0)));
  SpeedField s = build_speed_field(inclusion(), 0.9, d);
  InitialData data = make_initial_data(OpticalCoefficients{}, s, d);
  long steps = 0;
  for (auto _ : state) {
    ForwardResult r = simulate_forward(s, data, d, 0.5);
    steps = r.trace.n_steps;
    benchmark::DoNotOptimize(r.trace.values.data());
  }
  state.counters["steps"] = static_cast<double>(steps);
  state.counters["nodes"] = static_cast<double>(d.neumann().size());
}
BENCHMARK(BM_ForwardRun)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DirichletRun(benchmark::State& state) {
  Domain d = disk(static_cast<int>(state.range(0)));
  SpeedField s = build_speed_field(inclusion(), 0.9, d);
  CounterRng rng(1);
  DirichletProblem p;
  p.u0 = smooth_random_unknowns(d, rng);
  p.u1 = smooth_random_unknowns(d, rng);
  p.T = 0.5;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_dirichlet(s, d, p).u_last.data());
}
BENCHMARK(BM_DirichletRun)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_GramianApply(benchmark::State& state) {
  Domain d = disk(static_cast<int>(state.range(0)));
  SpeedField s = build_speed_field(inclusion(), 0.9, d);
  HumOperator op(s, d, 2.0, 0.5);
  CounterRng rng(2);
  Field y(2 * op.unknowns());
  for (double& v : y) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(op.gramian(y).data());
}
BENCHMARK(BM_GramianApply)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_DiffusionSolve(benchmark::State& state) {
  Domain d = disk(static_cast<int>(state.range(0)));
  SpeedField s = build_speed_field(inclusion(), 0.9, d);
  OpticalCoefficients optics;
  for (auto _ : state) benchmark::DoNotOptimize(solve_diffusion(optics, s, d).data());
}
BENCHMARK(BM_DiffusionSolve)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_AdjointGradient(benchmark::State& state) {
  InverseProblem p{disk(static_cast<int>(state.range(0))), 0.9, OpticalCoefficients{}, BoundaryTrace{}, 1.0,
                   0.5, 0.0, 3, StarInclusion(2, {0.5, 0.5, 0.0}, {0.2, 0.0, 0.0}, 0.05)};
  p.observed = forward_state(StarInclusion(2, {0.5, 0.5, 0.0}, {0.22, 0.01, 0.0}, 0.05), p).result.trace;
  std::vector<double> x{0.2, 0.0, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(adjoint_gradient(x, p).J);
}
BENCHMARK(BM_AdjointGradient)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
