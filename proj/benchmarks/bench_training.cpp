#include <benchmark/benchmark.h>

#include "advmal/defenses.hpp"
#include "advmal/training.hpp"

using namespace advmal;

namespace {

const SyntheticData& data() {
  static const SyntheticData d = [] {
    SyntheticSpec spec;
    spec.dim = 200;
    spec.per_class = {250, 250};
    spec.seed = 8;
    return generate_synthetic(spec);
  }();
  return d;
}

// Arg 0: inner steps T.
void BM_InnerMaximize(benchmark::State& state) {
  Mlp m({200, 64, 64, 2}, Activation::kRelu);
  m.initialize(1);
  const MlpClassifierView view(m);
  const ManipulationPolicy policy = ManipulationPolicy::additions_only(200);
  const InnerMaxConfig config{0.02, static_cast<std::size_t>(state.range(0)), 0, 0.1};
  Rng rng(2);
  const FeatureVector& x = data().data.examples[0];
  for (auto _ : state)
    benchmark::DoNotOptimize(inner_maximize(view, x, data().data.labels[0], &policy, config, rng));
}
BENCHMARK(BM_InnerMaximize)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_TrainEpochPlain(benchmark::State& state) {
  for (auto _ : state) {
    Mlp m({200, 64, 64, 2}, Activation::kRelu);
    m.initialize(1);
    benchmark::DoNotOptimize(train_supervised(m, data().data, {1, 64, 1e-3, 2}));
  }
}
BENCHMARK(BM_TrainEpochPlain)->Unit(benchmark::kMillisecond);

// One epoch of the min-max loop; arg 0 toggles the autoencoder.
void BM_TrainEpochHardened(benchmark::State& state) {
  DefenseConfig config;
  config.hidden = {64, 64};
  config.epochs = 1;
  config.batch_size = 64;
  config.inner = {0.1, 10, 0, 0.1};
  config.perturbed_classes = {1};
  const DefenseFlags flags{true, state.range(0) != 0, false, true};
  const ManipulationPolicy policy = ManipulationPolicy::additions_only(200);
  for (auto _ : state) benchmark::DoNotOptimize(train_hardened(data().data, &policy, config, flags));
}
BENCHMARK(BM_TrainEpochHardened)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
