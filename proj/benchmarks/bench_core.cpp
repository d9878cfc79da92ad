#include <benchmark/benchmark.h>

#include <random>

#include "mombayes/experiments.hpp"
#include "mombayes/mom.hpp"
#include "mombayes/sampler.hpp"

using namespace mombayes;

namespace {

std::vector<double> random_averages(std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> x(k);
  for (auto& xi : x) xi = z(rng);
  return x;
}

void BM_RhoDeriv1(benchmark::State& state) {
  const Rho rho(RhoSpec{.kind = static_cast<RhoKind>(state.range(0))});
  const auto z = random_averages(1024, 1);
  for (auto _ : state)
    for (double zi : z) benchmark::DoNotOptimize(rho.deriv1(2.0 * zi));
  state.SetItemsProcessed(state.iterations() * 1024);
}
BENCHMARK(BM_RhoDeriv1)->Arg(0)->Arg(1)->Arg(2);

void BM_SolveMom(benchmark::State& state) {
  const Rho rho(RhoSpec{.kind = static_cast<RhoKind>(state.range(1))});
  const auto x = random_averages(static_cast<std::size_t>(state.range(0)), 2);
  ScaleSchedule s;
  for (auto _ : state) benchmark::DoNotOptimize(solve_mom(x, rho, 10, s));
}
BENCHMARK(BM_SolveMom)->ArgsProduct({{20, 100, 1000}, {0, 1, 2}});

void BM_LogKernel(benchmark::State& state) {
  LocationSetup setup;
  setup.N = static_cast<std::size_t>(state.range(0));
  setup.k = static_cast<int>(state.range(1));
  setup.outliers = setup.k / 4;
  const auto post = location_posterior(setup, simulate_location(setup));
  const Vector theta = Vector::Constant(1, -30.01);
  for (auto _ : state) benchmark::DoNotOptimize(post.log_kernel(theta));
}
BENCHMARK(BM_LogKernel)->Args({1000, 100})->Args({10000, 100})->Args({100000, 300});

void BM_LogKernelGradient(benchmark::State& state) {
  LocationSetup setup;
  setup.N = static_cast<std::size_t>(state.range(0));
  setup.k = 100;
  const auto post = location_posterior(setup, simulate_location(setup));
  const Vector theta = Vector::Constant(1, -30.01);
  Vector grad;
  for (auto _ : state) benchmark::DoNotOptimize(post.log_density_and_gradient(theta, grad));
}
BENCHMARK(BM_LogKernelGradient)->Arg(1000)->Arg(10000);

void BM_SampleRwm(benchmark::State& state) {
  LocationSetup setup;
  setup.outliers = 40;
  const auto post = location_posterior(setup, simulate_location(setup));
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.draws = 1000;
  cfg.warmup = 500;
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sample(post, cfg));
}
BENCHMARK(BM_SampleRwm)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
