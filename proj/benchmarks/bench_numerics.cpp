#include <benchmark/benchmark.h>

#include <random>

#include "advmal/numerics.hpp"

using namespace advmal;

namespace {

std::vector<double> random_input(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution bit(0.3);
  std::vector<double> x(n);
  for (double& v : x) v = bit(gen) ? 1.0 : 0.0;
  return x;
}

// Arg 0: input dimension; hidden layers are 160 wide as in the full profile.
void BM_Forward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Mlp m({dim, 160, 160, 2}, Activation::kRelu);
  m.initialize(1);
  const auto x = random_input(dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(m, x));
}
BENCHMARK(BM_Forward)->Arg(200)->Arg(2000)->Arg(10000);

void BM_Backward(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Mlp m({dim, 160, 160, 2}, Activation::kRelu);
  m.initialize(1);
  const auto x = random_input(dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(backward(m, x, 1));
}
BENCHMARK(BM_Backward)->Arg(200)->Arg(2000)->Arg(10000);

void BM_InputGradientOnly(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  Mlp m({dim, 160, 160, 2}, Activation::kRelu);
  m.initialize(1);
  const auto x = random_input(dim, 2);
  const std::vector<double> upstream{0.5, -0.5};
  for (auto _ : state) {
    const ForwardTrace t = m.trace(x);
    benchmark::DoNotOptimize(m.backward(t, upstream, false));
  }
}
BENCHMARK(BM_InputGradientOnly)->Arg(200)->Arg(10000);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  AdamState adam(n, 1e-3);
  std::vector<double> vars(n, 0.1), grads(n, 0.01);
  for (auto _ : state) {
    adam_step(adam, vars, grads, Direction::kMinimize);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_AdamStep)->Arg(1 << 12)->Arg(1 << 20);

}  // namespace
