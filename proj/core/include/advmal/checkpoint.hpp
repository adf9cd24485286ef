#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "advmal/defenses.hpp"
#include "advmal/numerics.hpp"

namespace advmal {

/// Version written into every checkpoint; loading any other raises
/// VersionError.
inline constexpr int kCheckpointVersion = 1;

// JSON documents. Doubles are written with enough digits to round-trip.
std::string mlp_to_json(const Mlp& model);
Mlp mlp_from_json(std::string_view text);
std::string hardened_to_json(const HardenedClassifier& model);
HardenedClassifier hardened_from_json(std::string_view text);

void save_mlp(const std::filesystem::path& path, const Mlp& model);
Mlp load_mlp(const std::filesystem::path& path);
void save_hardened(const std::filesystem::path& path, const HardenedClassifier& model);
HardenedClassifier load_hardened(const std::filesystem::path& path);

/// Writes `manifest` (member count, subspace ratio, per-member feature
/// subsets and member file names) plus one hardened checkpoint per member
/// next to it, named "<manifest stem>.member<i>.json".
void save_ensemble(const std::filesystem::path& manifest, const EnsembleClassifier& ensemble,
                   double subspace_ratio);
EnsembleClassifier load_ensemble(const std::filesystem::path& manifest);

/// Loads any checkpoint kind (plain network, hardened model or ensemble
/// manifest) as a Classifier.
std::unique_ptr<Classifier> load_classifier(const std::filesystem::path& path);

/// Kind tag stored in a checkpoint: "mlp", "hardened" or "ensemble".
std::string checkpoint_kind(const std::filesystem::path& path);

}  // namespace advmal
