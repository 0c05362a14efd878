#include "pbcnet/converters.hpp"
#include "pbcnet/network.hpp"
#include "pbcnet/sim.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace pbcnet;

struct Fig8 {
  NetworkSpec spec;
  std::vector<ConverterModel> leaves;
  AssembledNetwork network;
  std::vector<PbcController> controllers;
  std::vector<Vector> initial;

  Fig8() {
    spec.root = NetworkNode::parallel(
        {NetworkNode::make_leaf(0), NetworkNode::series({NetworkNode::make_leaf(1), NetworkNode::make_leaf(2)})},
        {0.325, 0.675});
    spec.physical_load = 12.0;
    spec.voltage_targets = {36.0, 20.0, 16.0};
    leaves = {make_boost({Topology::Boost, 470e-6, 10e-6, 18.0, 1.0}),
              make_buck({Topology::Buck, 500e-6, 33e-6, 40.0, 1.0}),
              make_buckboost({Topology::BuckBoost, 330e-6, 20e-6, 24.0, 1.0})};
    network = assemble_network(spec, leaves);
    const std::vector<double> gains{0.02, 0.3, 0.02};
    controllers = make_controllers(network, gains);
    initial = {Vector(2), Vector(2), Vector(2)};
    initial[0] << 1.4, 10.0;
    initial[1] << 1.3, 16.0;
    initial[2] << 2.8, 12.0;
  }
};

// A chain of n boost leaves in series, each targeting 24 V.
NetworkSpec series_chain(int n) {
  NetworkSpec s;
  std::vector<NetworkNode> children;
  for (int m = 0; m < n; ++m) {
    children.push_back(NetworkNode::make_leaf(static_cast<std::size_t>(m)));
    s.voltage_targets.push_back(24.0);
  }
  s.root = n == 1 ? children.front() : NetworkNode::series(std::move(children));
  s.physical_load = 10.0 * n;
  return s;
}

void BM_AssembleNetwork(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const NetworkSpec spec = series_chain(n);
  const std::vector<ConverterModel> leaves(static_cast<std::size_t>(n),
                                           make_boost({Topology::Boost, 470e-6, 10e-6, 12.0, 1.0}));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_network(spec, leaves));
}
BENCHMARK(BM_AssembleNetwork)->Arg(1)->Arg(3)->Arg(6)->Arg(12);

void BM_PlantStep(benchmark::State& state) {
  const Fig8 f;
  const ClosedLoopPlant plant(f.network.composed, stack_operating_points(f.network.operating_points));
  Vector x(6);
  x << 1.4, 10.0, 1.3, 16.0, 2.8, 12.0;
  Vector duty(3);
  duty << 0.0, 0.7175, 0.59;
  for (auto _ : state) benchmark::DoNotOptimize(plant.step(x, duty, f.network.composed.stacked.source, 1e-6));
}
BENCHMARK(BM_PlantStep);

void BM_IdealRun(benchmark::State& state) {
  const Fig8 f;
  Scenario s;
  s.t_end = static_cast<double>(state.range(0)) * 1e-3;
  s.initial_state = f.initial;
  for (auto _ : state) benchmark::DoNotOptimize(run(f.spec, f.leaves, s, f.controllers));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(s.period_count()));
}
BENCHMARK(BM_IdealRun)->Arg(1)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_PerturbedRun(benchmark::State& state) {
  const Fig8 f;
  Scenario s;
  s.t_end = 20e-3;
  s.initial_state = f.initial;
  s.disturbance = InputPerturbation{10.0, 7, 1e-6};
  for (auto _ : state) benchmark::DoNotOptimize(run(f.spec, f.leaves, s, f.controllers));
}
BENCHMARK(BM_PerturbedRun)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
