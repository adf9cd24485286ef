#include "advmal/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "advmal/random.hpp"
#include "advmal/training.hpp"
#include "json.hpp"

namespace advmal {

namespace {

using nlohmann::ordered_json;

constexpr const char* kNoAttack = "No Attack";

std::vector<int> predict_all(const Classifier& model, std::span<const FeatureVector> xs) {
  std::vector<int> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = model.predict(xs[i]);
  return out;
}

ordered_json metrics_json(const MetricBlock& m, bool attacked) {
  ordered_json j;
  j["attack"] = m.attack;
  j["pool_accuracy"] = m.pool_accuracy;
  j["accuracy"] = m.binary.accuracy;
  j["fnr"] = m.binary.fnr;
  j["fpr"] = m.binary.fpr;
  if (m.binary.fnr_undefined) j["fnr_undefined"] = true;
  if (m.binary.fpr_undefined) j["fpr_undefined"] = true;
  j["macro_f1"] = m.macro_f1;
  if (attacked) {
    j["success_rate"] = m.success_rate;
    j["mean_flips"] = m.mean_flips;
  }
  return j;
}

ordered_json attack_json(const AttackConfig& c) {
  ordered_json j;
  j["name"] = std::string(attack_name(c.kind));
  j["max_steps"] = c.max_steps;
  j["step_size"] = c.step_size;
  j["epsilon_ball"] = std::isfinite(c.epsilon_ball) ? ordered_json(c.epsilon_ball)
                                                    : ordered_json("inf");
  if (c.kind == AttackKind::kEad) {
    j["ead_beta"] = c.ead_beta;
    j["ead_kappa"] = c.ead_kappa;
    j["ead_c"] = c.ead_c;
  }
  if (c.kind == AttackKind::kMimicry) {
    j["mimicry_candidates"] = c.mimicry_candidates;
    j["mimicry_selection"] =
        c.mimicry_selection == MimicrySelection::kNearest ? "nearest" : "random";
  }
  j["early_stop"] = c.early_stop;
  j["seed"] = c.seed;
  return j;
}

ordered_json spec_json(const DefenseSpec& spec) {
  const DefenseConfig& c = spec.config;
  ordered_json j;
  j["adversarial"] = spec.flags.adversarial;
  j["use_dae"] = spec.flags.use_dae;
  j["use_binarization"] = spec.flags.use_binarization;
  j["known_manipulation_set"] = spec.flags.known_manipulation_set;
  j["inner_learning_rate"] = c.inner.learning_rate;
  j["inner_steps"] = c.inner.steps;
  j["inner_restarts"] = c.inner.restarts;
  j["noise_ratio_max"] = c.inner.noise_ratio_max;
  j["perturbed_classes"] = c.perturbed_classes;
  j["subspace_ratio"] = c.subspace_ratio;
  j["ensemble_size"] = c.ensemble_size;
  j["data_fraction"] = c.data_fraction;
  j["oversample_ratio"] = c.oversample_ratio;
  j["binarization_threshold"] = c.binarization_threshold;
  j["hidden"] = c.hidden;
  j["activation"] = std::string(to_string(c.activation));
  j["latent_dim"] = c.latent_dim;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  return j;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::vector<std::size_t> select_attack_pool(const Dataset& test, int positive_class,
                                            std::size_t cap, std::uint64_t seed) {
  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < test.size(); ++i)
    if (test.labels[i] == positive_class) positives.push_back(i);
  const std::size_t k = std::min(cap, positives.size());
  Rng rng(seed);
  std::vector<std::size_t> pool;
  for (std::size_t j : sample_without_replacement(rng, positives.size(), k))
    pool.push_back(positives[j]);
  std::sort(pool.begin(), pool.end());
  return pool;
}

Mlp train_surrogate(const Dataset& train, const SurrogateProfile& profile, std::uint64_t seed) {
  std::vector<std::size_t> sizes{train.dim};
  sizes.insert(sizes.end(), profile.hidden.begin(), profile.hidden.end());
  sizes.push_back(static_cast<std::size_t>(train.class_count));
  Mlp model(sizes, profile.activation);
  model.initialize(derive_seed(seed, 0));
  train_supervised(model, train,
                   {profile.epochs, profile.batch_size, profile.learning_rate,
                    derive_seed(seed, 1)});
  return model;
}

std::unique_ptr<Classifier> train_defense(const Dataset& train, const ManipulationPolicy& policy,
                                          const DefenseSpec& spec) {
  if (spec.config.ensemble_size > 1)
    return std::make_unique<EnsembleClassifier>(
        train_ensemble(train, &policy, spec.config, spec.flags));
  return std::make_unique<HardenedClassifier>(
      train_hardened(train, &policy, spec.config, spec.flags));
}

EvaluationReport evaluate_models(std::span<const NamedClassifier> models,
                                 const Classifier* surrogate, const Dataset& train,
                                 const Dataset& test, const ManipulationPolicy& policy,
                                 std::span<const AttackConfig> attacks, ThreatModel threat,
                                 std::size_t pool_cap, int positive_class, std::uint64_t seed,
                                 std::size_t workers) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test set");
  if (threat == ThreatModel::kGreyBox && !attacks.empty() && surrogate == nullptr)
    throw std::invalid_argument("evaluate: grey-box attacks need a surrogate model");

  EvaluationReport report;
  report.threat = threat;
  report.seed = seed;
  report.pool_cap = pool_cap;
  report.positive_class = positive_class;
  report.pool = select_attack_pool(test, positive_class, pool_cap, derive_seed(seed, 10));
  report.attacks.assign(attacks.begin(), attacks.end());

  std::vector<FeatureVector> pool_x;
  std::vector<int> pool_y;
  for (std::size_t i : report.pool) {
    pool_x.push_back(test.examples[i]);
    pool_y.push_back(test.labels[i]);
  }
  std::vector<FeatureVector> benign;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.labels[i] != positive_class) benign.push_back(train.examples[i]);

  for (const NamedClassifier& named : models) {
    const Classifier& model = *named.model;
    DefenseReport dr;
    dr.name = named.name;

    const std::vector<int> clean_pred = predict_all(model, test.examples);
    dr.clean.attack = kNoAttack;
    dr.clean.binary = binary_metrics(test.labels, clean_pred, positive_class);
    dr.clean.macro_f1 = macro_f1(test.labels, clean_pred, test.class_count);
    std::size_t pool_correct = 0;
    for (std::size_t i : report.pool) pool_correct += clean_pred[i] == test.labels[i] ? 1 : 0;
    dr.clean.pool_accuracy =
        report.pool.empty() ? 0.0 : static_cast<double>(pool_correct) / report.pool.size();

    const std::vector<AttackRun> runs =
        run_attack_suite(model, surrogate, threat, pool_x, pool_y, policy, benign, attacks,
                         workers);
    double f1_sum = 0.0;
    for (const AttackRun& run : runs) {
      MetricBlock block;
      block.attack = std::string(attack_name(run.config.kind));
      std::vector<int> pred = clean_pred;
      std::size_t correct = 0, successes = 0, flips = 0;
      for (std::size_t p = 0; p < run.outcomes.size(); ++p) {
        const AttackOutcome& o = run.outcomes[p];
        const int y_hat = model.predict(o.x_adv);
        pred[report.pool[p]] = y_hat;
        correct += y_hat == pool_y[p] ? 1 : 0;
        successes += o.success ? 1 : 0;
        flips += o.flips;
      }
      const double n = std::max<double>(1.0, static_cast<double>(run.outcomes.size()));
      block.pool_accuracy = run.outcomes.empty() ? 0.0 : correct / n;
      block.success_rate = run.outcomes.empty() ? 0.0 : successes / n;
      block.mean_flips = run.outcomes.empty() ? 0.0 : flips / n;
      block.binary = binary_metrics(test.labels, pred, positive_class);
      block.macro_f1 = macro_f1(test.labels, pred, test.class_count);
      f1_sum += block.macro_f1;
      dr.attacks.push_back(std::move(block));
    }
    if (!runs.empty())
      dr.harmonic_mean =
          harmonic_mean(dr.clean.macro_f1, f1_sum / static_cast<double>(runs.size()));
    report.defenses.push_back(std::move(dr));
  }
  return report;
}

EvaluationReport run_experiment(const Dataset& train, const Dataset& test,
                                const ManipulationPolicy& policy, const ExperimentConfig& config) {
  if (train.empty() || test.empty())
    throw std::invalid_argument("run_experiment: empty train or test set");
  std::unique_ptr<Classifier> surrogate_view;
  Mlp surrogate;
  if (config.threat == ThreatModel::kGreyBox && !config.attacks.empty()) {
    if (!config.surrogate)
      throw std::invalid_argument("run_experiment: grey-box runs need a surrogate profile");
    surrogate = train_surrogate(train, *config.surrogate, derive_seed(config.seed, 11));
    surrogate_view = std::make_unique<MlpClassifierView>(surrogate);
  }

  std::vector<std::unique_ptr<Classifier>> trained;
  std::vector<NamedClassifier> named;
  for (std::size_t i = 0; i < config.defenses.size(); ++i) {
    DefenseSpec spec = config.defenses[i];
    spec.config.seed = derive_seed(config.seed, 20 + i);
    trained.push_back(train_defense(train, policy, spec));
    named.push_back({spec.name, trained.back().get()});
  }
  std::vector<AttackConfig> attacks = config.attacks;
  for (std::size_t j = 0; j < attacks.size(); ++j)
    attacks[j].seed = derive_seed(config.seed, 40 + j);

  EvaluationReport report =
      evaluate_models(named, surrogate_view.get(), train, test, policy, attacks, config.threat,
                      config.pool_cap, config.positive_class, config.seed, config.workers);
  for (std::size_t i = 0; i < config.defenses.size(); ++i) {
    report.specs.push_back(config.defenses[i]);
    report.specs.back().config.seed = derive_seed(config.seed, 20 + i);
  }
  if (surrogate_view) report.surrogate = config.surrogate;
  return report;
}

std::string report_to_json(const EvaluationReport& report) {
  ordered_json j;
  j["threat_model"] = std::string(threat_model_name(report.threat));
  j["seed"] = report.seed;
  j["pool_cap"] = report.pool_cap;
  j["positive_class"] = report.positive_class;
  if (report.surrogate) {
    const SurrogateProfile& p = *report.surrogate;
    j["surrogate"] = {{"hidden", p.hidden},
                      {"activation", std::string(to_string(p.activation))},
                      {"epochs", p.epochs},
                      {"batch_size", p.batch_size},
                      {"learning_rate", p.learning_rate}};
  }
  j["pool_size"] = report.pool.size();
  j["pool"] = report.pool;
  ordered_json attacks = ordered_json::array();
  for (const AttackConfig& c : report.attacks) attacks.push_back(attack_json(c));
  j["attacks"] = std::move(attacks);
  ordered_json defenses = ordered_json::array();
  for (std::size_t i = 0; i < report.defenses.size(); ++i) {
    const DefenseReport& d = report.defenses[i];
    ordered_json dj;
    dj["name"] = d.name;
    if (i < report.specs.size()) dj["config"] = spec_json(report.specs[i]);
    dj["clean"] = metrics_json(d.clean, false);
    ordered_json blocks = ordered_json::array();
    for (const MetricBlock& b : d.attacks) blocks.push_back(metrics_json(b, true));
    dj["attacks"] = std::move(blocks);
    dj["harmonic_mean"] = d.harmonic_mean ? ordered_json(*d.harmonic_mean) : ordered_json(nullptr);
    defenses.push_back(std::move(dj));
  }
  j["defenses"] = std::move(defenses);
  return j.dump(2) + "\n";
}

std::string report_table(const EvaluationReport& report) {
  std::vector<std::string> rows{kNoAttack};
  for (const AttackConfig& c : report.attacks) rows.emplace_back(attack_name(c.kind));
  std::size_t first_width = 0;
  for (const auto& r : rows) first_width = std::max(first_width, r.size());

  std::ostringstream out;
  auto pad = [&](const std::string& s, std::size_t w) {
    out << s << std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  pad("Attack", first_width + 2);
  std::vector<std::size_t> widths;
  for (const DefenseReport& d : report.defenses) {
    widths.push_back(std::max<std::size_t>(d.name.size(), 6) + 2);
    pad(d.name, widths.back());
  }
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    pad(rows[r], first_width + 2);
    for (std::size_t c = 0; c < report.defenses.size(); ++c) {
      const DefenseReport& d = report.defenses[c];
      const double v = r == 0 ? d.clean.pool_accuracy : d.attacks[r - 1].pool_accuracy;
      pad(percent(v), widths[c]);
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace advmal
