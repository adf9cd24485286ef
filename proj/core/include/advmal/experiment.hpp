#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advmal/attacks.hpp"
#include "advmal/defenses.hpp"
#include "advmal/metrics.hpp"

namespace advmal {

/// One defense to train: plain when flags.adversarial and flags.use_dae
/// are both off, an ensemble when config.ensemble_size > 1.
struct DefenseSpec {
  std::string name;
  DefenseFlags flags;
  DefenseConfig config;
};

/// Attacker's surrogate network for grey-box runs.
struct SurrogateProfile {
  std::vector<std::size_t> hidden = {200, 200};
  Activation activation = Activation::kRelu;
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
};

struct ExperimentConfig {
  std::vector<DefenseSpec> defenses;
  std::vector<AttackConfig> attacks;
  ThreatModel threat = ThreatModel::kGreyBox;
  std::optional<SurrogateProfile> surrogate = SurrogateProfile{};
  std::size_t pool_cap = 800;
  int positive_class = 1;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct MetricBlock {
  std::string attack;  // "No Attack" for the clean block
  /// Fraction of the attacked pool still classified as its true label.
  double pool_accuracy = 0.0;
  /// Test-set metrics with every pool example replaced by its attacked copy
  /// (the clean block uses the untouched test set).
  BinaryMetrics binary;
  double macro_f1 = 0.0;
  double success_rate = 0.0;  // attacks only
  double mean_flips = 0.0;    // attacks only
};

struct DefenseReport {
  std::string name;
  MetricBlock clean;
  std::vector<MetricBlock> attacks;
  /// Harmonic mean of the clean macro F1 and the mean macro F1 over the
  /// attacks; absent when no attack ran.
  std::optional<double> harmonic_mean;
};

struct EvaluationReport {
  ThreatModel threat = ThreatModel::kGreyBox;
  std::uint64_t seed = 0;
  std::size_t pool_cap = 0;
  int positive_class = 1;
  std::vector<std::size_t> pool;  // test-set indices of the attacked examples
  std::vector<AttackConfig> attacks;
  std::vector<DefenseReport> defenses;
  /// Training recipe of each defense, index-aligned with `defenses`; may be
  /// empty when the models came from elsewhere.
  std::vector<DefenseSpec> specs;
  std::optional<SurrogateProfile> surrogate;
};

struct NamedClassifier {
  std::string name;
  const Classifier* model;
};

/// Positive-class test indices, at most `cap`, drawn with `seed` and sorted.
std::vector<std::size_t> select_attack_pool(const Dataset& test, int positive_class,
                                            std::size_t cap, std::uint64_t seed);

/// Plain network trained with the surrogate profile.
Mlp train_surrogate(const Dataset& train, const SurrogateProfile& profile, std::uint64_t seed);

/// Trains one defense. Plain specs return a HardenedClassifier wrapping a
/// single network; ensembles return an EnsembleClassifier.
std::unique_ptr<Classifier> train_defense(const Dataset& train, const ManipulationPolicy& policy,
                                          const DefenseSpec& spec);

/// Attacks every model on the pool drawn from `test` and collects metrics.
/// Mimicry draws its guide examples from the negatives of `train`.
EvaluationReport evaluate_models(std::span<const NamedClassifier> models,
                                 const Classifier* surrogate, const Dataset& train,
                                 const Dataset& test, const ManipulationPolicy& policy,
                                 std::span<const AttackConfig> attacks, ThreatModel threat,
                                 std::size_t pool_cap, int positive_class, std::uint64_t seed,
                                 std::size_t workers = 1);

/// Trains the defenses (and the surrogate for grey-box runs) and evaluates
/// them. Defense i trains with seed derive_seed(seed, 20 + i), attack j
/// with derive_seed(seed, 40 + j), the surrogate with derive_seed(seed, 11).
EvaluationReport run_experiment(const Dataset& train, const Dataset& test,
                                const ManipulationPolicy& policy, const ExperimentConfig& config);

/// Machine-readable report (stable key order, no timestamps).
std::string report_to_json(const EvaluationReport& report);
/// Text table: one row per attack plus "No Attack", one column per defense,
/// cells are attacked-pool accuracy in percent.
std::string report_table(const EvaluationReport& report);

}  // namespace advmal
