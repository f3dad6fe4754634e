#include <benchmark/benchmark.h>

#include "mgsim/sim.hpp"
#include "mgsim/stability.hpp"

using namespace mgsim;

namespace {

// Ring of identical boost DGUs sharing one bus, scaled by the benchmark argument.
sim::Scenario ring(int n) {
  sim::Scenario s;
  s.name = "bench_ring";
  for (int i = 0; i < n; ++i) {
    sim::DguConfig d;
    d.name = "DGU" + std::to_string(i + 1);
    d.spec = {netmodel::ConverterKind::Boost, 200.0, 0.1, 2e-3, 2e-3, 0.1 + 0.01 * (i % 5)};
    d.controller.poles = std::array<Complex, 3>{Complex(-600.0, 0.0), Complex(-400.0, 0.0), Complex(-200.0, 0.0)};
    d.controller.gamma = 0.1;
    s.dgus.push_back(d);
    s.secondary.edges.emplace_back(i, (i + 1) % n);
  }
  s.loads.push_back({"resistive", netmodel::LoadKind::Linear, 1000.0 * n, 0.01, {}});
  s.loads.push_back({"motor", netmodel::LoadKind::ConstantPower, 800.0 * n, 0.01, {}});
  return s;
}

struct DerivativeFixture {
  explicit DerivativeFixture(int n) : s(ring(n)), design(sim::design_scenario(s)), model(s, design) {
    x = model.initial_state();
    x += VecX::Constant(x.size(), 1e-3);
  }
  sim::Scenario s;
  sim::ScenarioDesign design;
  sim::SimModel model;
  VecX x;
};

void BM_DerivativeSerial(benchmark::State& state) {
  DerivativeFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model.derivative_serial(f.x));
  }
}

void BM_DerivativeParallel(benchmark::State& state) {
  DerivativeFixture f(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.model.derivative_parallel(f.x));
  }
}

struct SweepFixture {
  SweepFixture() {
    const auto d = sim::design_scenario(ring(2));
    a_m = d.dgus[0].dd.a_m;
    b = d.dgus[0].dd.b_m;
    theta_max = d.dgus[0].theta_max;
  }
  Mat3 a_m;
  Vec3 b;
  double theta_max = 0.0;
};

void BM_LambdaSweepSerial(benchmark::State& state) {
  SweepFixture f;
  const auto grid = stability::log_grid(100.0, 1e5, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stability::sweep_filter_bandwidth_serial(f.a_m, f.b, f.theta_max, grid));
  }
}

void BM_LambdaSweepParallel(benchmark::State& state) {
  SweepFixture f;
  const auto grid = stability::log_grid(100.0, 1e5, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stability::sweep_filter_bandwidth(f.a_m, f.b, f.theta_max, grid));
  }
}

void BM_EigenLocusSerial(benchmark::State& state) {
  const auto sys = stability::default_two_converter_system();
  const auto grid = stability::linear_grid(-10.0, 10.0, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stability::eigen_locus_serial(sys, grid));
  }
}

void BM_EigenLocusParallel(benchmark::State& state) {
  const auto sys = stability::default_two_converter_system();
  const auto grid = stability::linear_grid(-10.0, 10.0, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stability::eigen_locus(sys, grid));
  }
}

}  // namespace

BENCHMARK(BM_DerivativeSerial)->Arg(6)->Arg(64)->Arg(512);
BENCHMARK(BM_DerivativeParallel)->Arg(6)->Arg(64)->Arg(512);
BENCHMARK(BM_LambdaSweepSerial)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LambdaSweepParallel)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EigenLocusSerial)->Arg(201)->Arg(2001)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_EigenLocusParallel)->Arg(201)->Arg(2001)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
