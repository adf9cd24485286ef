#include <ostream>
#include <stdexcept>
#include <string>

#include "advmal/attacks.hpp"
#include "advmal/parallel.hpp"
#include "advmal/random.hpp"

namespace advmal {

std::string_view threat_model_name(ThreatModel t) {
  return t == ThreatModel::kWhiteBox ? "white-box" : "grey-box";
}

std::optional<ThreatModel> parse_threat_model(std::string_view name) {
  if (name == "white-box" || name == "white_box" || name == "whitebox") return ThreatModel::kWhiteBox;
  if (name == "grey-box" || name == "grey_box" || name == "greybox" || name == "gray-box")
    return ThreatModel::kGreyBox;
  return std::nullopt;
}

std::vector<AttackRun> run_attack_suite(const Classifier& victim, const Classifier* surrogate,
                                        ThreatModel threat,
                                        std::span<const FeatureVector> examples,
                                        std::span<const int> labels,
                                        const ManipulationPolicy& policy,
                                        std::span<const FeatureVector> benign_pool,
                                        std::span<const AttackConfig> configs,
                                        std::size_t workers) {
  if (examples.size() != labels.size())
    throw ShapeError("attack suite: examples and labels differ in length");
  if (threat == ThreatModel::kGreyBox && surrogate == nullptr && !configs.empty())
    throw std::invalid_argument("attack suite: grey-box attacks need a surrogate model");
  const Classifier& attacker = threat == ThreatModel::kGreyBox ? *surrogate : victim;
  const AttackContext ctx{attacker, victim, policy, benign_pool};

  std::vector<AttackRun> runs;
  runs.reserve(configs.size());
  for (const AttackConfig& config : configs) {
    AttackRun run;
    run.config = config;
    run.outcomes.resize(examples.size());
    parallel_for(examples.size(), resolve_workers(workers), [&](std::size_t i) {
      AttackConfig local = config;
      local.seed = derive_seed(config.seed, i);
      run.outcomes[i] = run_attack(ctx, examples[i], labels[i], local);
    });
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_attack_table(std::ostream& out, std::span<const AttackRun> runs,
                        std::span<const std::size_t> example_ids) {
  for (const AttackRun& run : runs)
    if (!example_ids.empty() && example_ids.size() != run.outcomes.size())
      throw ShapeError("attack table: example ids do not match the outcomes");
  out << "attack,example_id,success,flips,l1,l2,linf,steps_used\n";
  for (const AttackRun& run : runs) {
    for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
      const AttackOutcome& o = run.outcomes[i];
      const std::size_t id = example_ids.empty() ? i : example_ids[i];
      out << attack_name(run.config.kind) << ',' << id << ',' << (o.success ? 1 : 0) << ','
          << o.flips << ',' << o.l1 << ',' << o.l2 << ',' << o.linf << ',' << o.steps_used
          << '\n';
    }
  }
}

}  // namespace advmal
