#include "speedprof/depth_boxplot.hpp"
#include "speedprof/kernel_spline.hpp"
#include "speedprof/monotone.hpp"
#include "speedprof/profile.hpp"
#include "speedprof/registration.hpp"
#include "speedprof/simulation.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

namespace sp = speedprof;

namespace {

sp::kernel_spline::ObservationSet dataset(int n) {
  sp::simulation::SimulationConfig cfg;
  cfg.function = sp::simulation::TestFunction::F2;
  cfg.n = n;
  return sp::simulation::simulate_dataset(cfg, 0);
}

void BM_SplineFit(benchmark::State& state) {
  const auto data = dataset(static_cast<int>(state.range(0)));
  const sp::kernel_spline::VarianceEstimates var{0.04, 1e-4};
  for (auto _ : state) benchmark::DoNotOptimize(sp::kernel_spline::fit(data, 3, 1e-4, var));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SplineFit)->RangeMultiplier(2)->Range(25, 400)->Complexity(benchmark::oNCubed);

void BM_LambdaSelection(benchmark::State& state) {
  const auto data = dataset(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const sp::kernel_spline::ReducedProblem joint(data, 3, 25.0, 1e4);
    benchmark::DoNotOptimize(sp::kernel_spline::select_lambda(joint, sp::kernel_spline::Criterion::GML));
  }
}
BENCHMARK(BM_LambdaSelection)->Arg(50)->Arg(150);

void BM_MonotoneFit(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<double> t(n), y(n);
  for (int i = 0; i < n; ++i) {
    t[i] = static_cast<double>(i) / (n - 1);
    y[i] = 0.5 + 0.5 * std::pow(2 * t[i] - 1, 3);
  }
  for (auto _ : state) benchmark::DoNotOptimize(sp::monotone::fit_monotone(t, y));
}
BENCHMARK(BM_MonotoneFit)->Arg(50)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_TwoStepEstimate(benchmark::State& state) {
  const auto data = dataset(50);
  for (auto _ : state) benchmark::DoNotOptimize(sp::profile::two_step_estimate(data));
}
BENCHMARK(BM_TwoStepEstimate)->Unit(benchmark::kMillisecond);

void BM_GeneralizedInverse(benchmark::State& state) {
  const auto p = sp::profile::analytic_profile(
      [](double t) { return sp::simulation::true_function(sp::simulation::TestFunction::F3, t); },
      [](double t) { return sp::simulation::true_derivative(sp::simulation::TestFunction::F3, t); }, 0.0, 3.0);
  double x = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(p.speed(x));
    x = x > 1.9 ? 0.1 : x + 0.013;
  }
}
BENCHMARK(BM_GeneralizedInverse);

void BM_Depth(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  sp::depth::FunctionalSample s;
  for (int j = 0; j <= 1000; ++j) s.grid.push_back(j);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z(rng), b = z(rng);
    std::vector<double> c;
    for (double x : s.grid) c.push_back(10 + a + b * std::sin(x / 100));
    s.curves.push_back(std::move(c));
  }
  for (auto _ : state) {
    const auto d = sp::depth::h_modal_depth(s, sp::depth::default_bandwidth(s));
    benchmark::DoNotOptimize(sp::depth::functional_boxplot(s, d));
  }
}
BENCHMARK(BM_Depth)->Arg(20)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Warp(benchmark::State& state) {
  std::vector<double> grid;
  std::vector<double> curve;
  for (int j = 0; j <= 1100; ++j) {
    grid.push_back(j);
    curve.push_back(std::min(12.0, std::sqrt(3.0 * std::abs(j - 250.0))));
  }
  const auto h = sp::registration::build_warping({250.0, 740.0}, {240.0, 730.0}, 1100.0);
  for (auto _ : state) benchmark::DoNotOptimize(sp::registration::apply_warp(grid, curve, h));
}
BENCHMARK(BM_Warp);

}  // namespace
BENCHMARK_MAIN();
