#include <sstream>

#include "advmal/experiment.hpp"
#include "doctest.h"
#include "json.hpp"
#include "metric_oracles.hpp"
#include "test_support.hpp"

using namespace advmal;
using namespace advmal::testing;

namespace {

struct Task {
  DatasetSplit parts;
  ManipulationPolicy policy;
};

const Task& task() {
  static const Task t = [] {
    SyntheticSpec spec;
    spec.dim = 40;
    spec.per_class = {120, 120};
    spec.seed = 51;
    SyntheticData syn = generate_synthetic(spec);
    return Task{split(syn.data, {0.6, 0.2, 0.2}, 52), ManipulationPolicy::additions_only(40)};
  }();
  return t;
}

DefenseSpec plain_spec() {
  DefenseSpec s;
  s.name = "basic";
  s.flags = {false, false, false, true};
  s.config.hidden = {16};
  s.config.epochs = 8;
  s.config.batch_size = 32;
  s.config.learning_rate = 3e-3;
  return s;
}

ExperimentConfig small_config(std::vector<AttackKind> kinds, ThreatModel threat) {
  ExperimentConfig c;
  c.defenses = {plain_spec()};
  for (AttackKind k : kinds) {
    AttackConfig a = AttackConfig::defaults(k);
    a.max_steps = std::min<std::size_t>(a.max_steps, 20);
    c.attacks.push_back(a);
  }
  c.threat = threat;
  c.surrogate = SurrogateProfile{{16}, Activation::kRelu, 5, 32, 3e-3};
  c.pool_cap = 20;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("experiment") {
  TEST_CASE("no attacks gives a clean-only report") {
    const Task& t = task();
    const EvaluationReport r = run_experiment(t.parts.train, t.parts.test, t.policy,
                                              small_config({}, ThreatModel::kGreyBox));
    REQUIRE(r.defenses.size() == 1);
    CHECK(r.defenses[0].attacks.empty());
    CHECK_FALSE(r.defenses[0].harmonic_mean.has_value());
    const auto j = nlohmann::json::parse(report_to_json(r));
    CHECK(j["defenses"][0]["harmonic_mean"].is_null());
    CHECK(j["defenses"][0]["config"]["epochs"] == 8);
    CHECK(r.pool.size() == 20);
    const std::string table = report_table(r);
    CHECK(std::count(table.begin(), table.end(), '\n') == 2);
  }

  TEST_CASE("reports replay byte for byte and carry consistent metrics") {
    const Task& t = task();
    const auto cfg = small_config({AttackKind::kFgsm, AttackKind::kBca, AttackKind::kRandom},
                                  ThreatModel::kWhiteBox);
    const EvaluationReport a = run_experiment(t.parts.train, t.parts.test, t.policy, cfg);
    const EvaluationReport b = run_experiment(t.parts.train, t.parts.test, t.policy, cfg);
    CHECK(report_to_json(a) == report_to_json(b));
    CHECK(report_table(a) == report_table(b));

    const DefenseReport& d = a.defenses[0];
    REQUIRE(d.attacks.size() == 3);
    // FGSM only ascends the loss, so it never helps the classifier.
    CHECK(d.attacks[0].pool_accuracy <= d.clean.pool_accuracy);
    double f1 = 0.0;
    for (const auto& blk : d.attacks) {
      f1 += blk.macro_f1;
      CHECK(blk.success_rate == doctest::Approx(1.0 - blk.pool_accuracy));
    }
    REQUIRE(d.harmonic_mean.has_value());
    CHECK(*d.harmonic_mean == doctest::Approx(oracle_harmonic(d.clean.macro_f1, f1 / 3.0)));
    const auto j = nlohmann::json::parse(report_to_json(a));
    CHECK(j["attacks"].size() == 3);
    CHECK(j["threat_model"] == "white-box");
  }

  TEST_CASE("grey-box runs need a surrogate") {
    const Task& t = task();
    auto cfg = small_config({AttackKind::kFgsm}, ThreatModel::kGreyBox);
    cfg.surrogate.reset();
    CHECK_THROWS_AS(run_experiment(t.parts.train, t.parts.test, t.policy, cfg), std::invalid_argument);
    const HardenedClassifier h = train_hardened(t.parts.train, &t.policy, plain_spec().config,
                                                plain_spec().flags);
    const std::vector<NamedClassifier> models{{"basic", &h}};
    const std::vector<AttackConfig> attacks{AttackConfig::defaults(AttackKind::kFgsm)};
    CHECK_THROWS_AS(evaluate_models(models, nullptr, t.parts.train, t.parts.test, t.policy, attacks,
                                    ThreatModel::kGreyBox, 10, 1, 0),
                    std::invalid_argument);
  }

  TEST_CASE("grey-box with the victim as its own surrogate equals white-box") {
    const Task& t = task();
    const HardenedClassifier h = train_hardened(t.parts.train, &t.policy, plain_spec().config,
                                                plain_spec().flags);
    const std::vector<NamedClassifier> models{{"basic", &h}};
    std::vector<AttackConfig> attacks;
    for (AttackKind k : {AttackKind::kPgdL1, AttackKind::kGrosse}) attacks.push_back(AttackConfig::defaults(k));
    EvaluationReport w = evaluate_models(models, nullptr, t.parts.train, t.parts.test, t.policy,
                                         attacks, ThreatModel::kWhiteBox, 15, 1, 4);
    EvaluationReport g = evaluate_models(models, &h, t.parts.train, t.parts.test, t.policy,
                                         attacks, ThreatModel::kGreyBox, 15, 1, 4);
    for (std::size_t a = 0; a < attacks.size(); ++a)
      CHECK(w.defenses[0].attacks[a].pool_accuracy == g.defenses[0].attacks[a].pool_accuracy);
  }
}
