#include <benchmark/benchmark.h>

#include "advmal/attacks.hpp"
#include "advmal/training.hpp"

using namespace advmal;

namespace {

struct Fixture {
  SyntheticData syn;
  Mlp model;
  std::vector<FeatureVector> benign;
  std::vector<std::size_t> malware;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture out;
    SyntheticSpec spec;
    spec.dim = 200;
    spec.per_class = {300, 300};
    spec.seed = 3;
    out.syn = generate_synthetic(spec);
    out.model = Mlp({200, 64, 64, 2}, Activation::kRelu);
    out.model.initialize(4);
    train_supervised(out.model, out.syn.data, {10, 64, 1e-3, 5});
    for (std::size_t i = 0; i < out.syn.data.size(); ++i) {
      if (out.syn.data.labels[i] == 0)
        out.benign.push_back(out.syn.data.examples[i]);
      else
        out.malware.push_back(i);
    }
    return out;
  }();
  return f;
}

// One full attack on a rotating malware example; early stopping is off so
// every iteration of the budget is timed.
void BM_Attack(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto kind = static_cast<AttackKind>(state.range(0));
  const MlpClassifierView view(f.model);
  const ManipulationPolicy policy = ManipulationPolicy::additions_only(200);
  const AttackContext ctx{view, view, policy, f.benign};
  AttackConfig config = AttackConfig::defaults(kind);
  config.early_stop = false;
  std::size_t n = 0;
  for (auto _ : state) {
    const std::size_t idx = f.malware[n++ % f.malware.size()];
    benchmark::DoNotOptimize(run_attack(ctx, f.syn.data.examples[idx], 1, config));
  }
  state.SetLabel(std::string(attack_name(kind)));
}
BENCHMARK(BM_Attack)->DenseRange(0, static_cast<int>(kAttackKindCount) - 1)->Unit(benchmark::kMicrosecond);

void BM_ProjectL1Ball(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (i % 7) * 0.3 - 0.9;
  for (auto _ : state) {
    std::vector<double> w = v;
    project_l1_ball(w, 5.0);
    benchmark::DoNotOptimize(w.data());
  }
}
BENCHMARK(BM_ProjectL1Ball)->Arg(200)->Arg(10000);

}  // namespace
