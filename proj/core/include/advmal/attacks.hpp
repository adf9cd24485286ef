#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advmal/classifier.hpp"
#include "advmal/datamodel.hpp"

namespace advmal {

enum class AttackKind {
  kRandom,
  kMimicry,
  kFgsm,
  kGrosse,
  kBga,
  kBca,
  kPgdL1,
  kPgdL2,
  kPgdLinf,
  kPgdAdam,
  kEad,
};

inline constexpr std::size_t kAttackKindCount = 11;

std::string_view attack_name(AttackKind kind);
std::optional<AttackKind> parse_attack(std::string_view name);
std::vector<AttackKind> all_attacks();

enum class MimicrySelection { kNearest, kRandom };

struct AttackConfig {
  AttackKind kind = AttackKind::kFgsm;
  std::size_t max_steps = 100;
  double step_size = 1.0;
  /// Radius of the l1/l2/linf perturbation ball for the PGD norm variants.
  double epsilon_ball = std::numeric_limits<double>::infinity();
  double ead_beta = 0.1;
  double ead_kappa = 64.0;
  double ead_c = 1.0;
  std::size_t mimicry_candidates = 10;
  MimicrySelection mimicry_selection = MimicrySelection::kNearest;
  /// Stop iterating once the attacker's model misclassifies the rounded
  /// point. EAD always runs its full budget and keeps the successful
  /// iterate with the smallest l1 perturbation.
  bool early_stop = true;
  std::uint64_t seed = 0;

  /// Budgets and step sizes used for the evaluation protocol.
  static AttackConfig defaults(AttackKind kind);
};

struct AttackOutcome {
  FeatureVector x_adv;
  bool success = false;  // judged on the victim
  std::size_t flips = 0;
  double l1 = 0.0;
  double l2 = 0.0;
  double linf = 0.0;
  std::size_t steps_used = 0;
  /// Final continuous iterate x + delta for PGD/EAD; empty otherwise.
  std::vector<double> continuous;
};

/// Who computes gradients and who is judged. White-box attacks use the same
/// model for both; grey-box attacks read gradients from a surrogate.
struct AttackContext {
  const Classifier& attacker;
  const Classifier& victim;
  const ManipulationPolicy& policy;
  std::span<const FeatureVector> benign_pool = {};
};

AttackOutcome random_attack(const AttackContext& ctx, std::span<const double> x, int y,
                            const AttackConfig& config);
AttackOutcome mimicry_attack(const AttackContext& ctx, std::span<const double> x, int y,
                             const AttackConfig& config);
AttackOutcome fgsm(const AttackContext& ctx, std::span<const double> x, int y,
                   const AttackConfig& config);
AttackOutcome grosse(const AttackContext& ctx, std::span<const double> x, int y,
                     const AttackConfig& config);
AttackOutcome bga(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config);
AttackOutcome bca(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config);
/// Dispatches on config.kind among the four PGD variants.
AttackOutcome pgd(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config);
AttackOutcome ead(const AttackContext& ctx, std::span<const double> x, int y,
                  const AttackConfig& config);

/// Dispatches on config.kind.
AttackOutcome run_attack(const AttackContext& ctx, std::span<const double> x, int y,
                         const AttackConfig& config);

// Shared building blocks, exposed for tests and for the inner maximizer.

/// Per-coordinate bounds for a continuous relaxation of the manipulation
/// set: coordinates that may not flip are pinned to their original bit.
struct FeasibleBox {
  std::vector<double> lower;
  std::vector<double> upper;

  static FeasibleBox from(std::span<const double> x, const ManipulationPolicy& policy);
  void clip(std::span<double> point) const;
  /// Zeroes gradient components that would push a coordinate past its bound.
  void mask_ascent(std::span<const double> point, std::span<double> grad) const;
};

/// Euclidean projection onto the l1 ball of the given radius.
void project_l1_ball(std::span<double> v, double radius);

enum class ThreatModel { kWhiteBox, kGreyBox };

std::string_view threat_model_name(ThreatModel t);
std::optional<ThreatModel> parse_threat_model(std::string_view name);

struct AttackRun {
  AttackConfig config;
  std::vector<AttackOutcome> outcomes;  // one per example, in input order
};

/// Runs every configured attack on every example. Grey-box runs take their
/// gradients from `surrogate` (required) and are judged on `victim`.
/// Example i uses seed derive_seed(config.seed, i), so results do not
/// depend on the worker count.
std::vector<AttackRun> run_attack_suite(const Classifier& victim, const Classifier* surrogate,
                                        ThreatModel threat,
                                        std::span<const FeatureVector> examples,
                                        std::span<const int> labels,
                                        const ManipulationPolicy& policy,
                                        std::span<const FeatureVector> benign_pool,
                                        std::span<const AttackConfig> configs,
                                        std::size_t workers = 1);

/// CSV table: attack,example_id,success,flips,l1,l2,linf,steps_used.
void write_attack_table(std::ostream& out, std::span<const AttackRun> runs,
                        std::span<const std::size_t> example_ids = {});

}  // namespace advmal
