#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "advmal/errors.hpp"

namespace advmal {

/// One example in [0,1]^dim; binary once binarized.
using FeatureVector = std::vector<double>;

struct Dataset {
  std::vector<FeatureVector> examples;
  std::vector<int> labels;
  int class_count = 2;
  std::size_t dim = 0;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  /// Throws ShapeError / std::out_of_range when sizes, dimensions, value
  /// ranges or labels are inconsistent.
  void validate() const;

  std::vector<std::size_t> class_counts() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Keeps only the listed feature columns, in the listed order.
  Dataset select_features(std::span<const std::size_t> features) const;

  bool operator==(const Dataset&) const = default;
};

/// Per-feature permission to flip 0->1 (addition) and 1->0 (removal).
struct ManipulationPolicy {
  std::vector<bool> addition_allowed;
  std::vector<bool> removal_allowed;

  static ManipulationPolicy all_allowed(std::size_t dim);
  static ManipulationPolicy additions_only(std::size_t dim);
  static ManipulationPolicy none_allowed(std::size_t dim);

  std::size_t dim() const { return addition_allowed.size(); }
  /// Whether coordinate `i` may change from its original bit `original`.
  bool can_flip(std::size_t i, double original) const {
    return original < 0.5 ? addition_allowed[i] : removal_allowed[i];
  }
  ManipulationPolicy restrict_to(std::span<const std::size_t> features) const;

  bool operator==(const ManipulationPolicy&) const = default;
};

struct BinarizationThresholds {
  std::vector<double> theta;

  static BinarizationThresholds uniform(std::size_t dim, double value = 0.5) {
    return {std::vector<double>(dim, value)};
  }
  bool operator==(const BinarizationThresholds&) const = default;
};

/// output[i] = x[i] < theta[i] ? 0 : 1.
FeatureVector binarize(std::span<const double> x, const BinarizationThresholds& theta);

bool is_binary(std::span<const double> x);

/// True iff every 0->1 flip is addition-allowed and every 1->0 flip is
/// removal-allowed. Throws std::invalid_argument on non-binary input.
bool admissible(std::span<const double> x, std::span<const double> x_adv,
                const ManipulationPolicy& policy);

/// Rounds a continuous point (clipped to [0,1], ties up) back into the
/// manipulation set of binary `x`, reverting every forbidden flip.
FeatureVector project_to_m(std::span<const double> x, std::span<const double> x_cont,
                           const ManipulationPolicy& policy);

/// Replicates randomly chosen examples of each class (with replacement)
/// until every class holds at least ceil(ratio * largest class count).
/// Originals keep their order; replicas are appended class by class.
Dataset oversample(const Dataset& data, double ratio, std::uint64_t seed);

struct DatasetSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Stratified, seed-deterministic three-way split. Per class, boundaries are
/// placed at round(cumulative fraction * class count).
DatasetSplit split(const Dataset& data, std::array<double, 3> fractions,
                   std::uint64_t seed);

struct SyntheticSpec {
  std::size_t dim = 200;
  int classes = 2;
  std::vector<std::size_t> per_class = {500, 500};
  double flip_noise = 0.05;
  std::uint64_t seed = 0;
  double prototype_density = 0.5;
  double addition_fraction = 0.75;
  double removal_fraction = 0.5;
};

struct SyntheticData {
  Dataset data;
  ManipulationPolicy policy;
  std::vector<FeatureVector> prototypes;
};

/// Class-prototype data: every example copies its class's random binary
/// prototype with each bit flipped independently with probability
/// `flip_noise`. The examples are shuffled; the policy marks a random
/// subset of features addition- and removal-allowed.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Sparse text format: one example per line, "label idx:val idx:val ...",
// ascending indices; '#' lines are comments. write_sparse emits a leading
// "# dim=<d> classes=<o>" header that read_sparse uses when no dimension is
// supplied.
Dataset parse_sparse(std::istream& in, std::optional<std::size_t> dim = std::nullopt,
                     std::optional<int> class_count = std::nullopt);
void format_sparse(std::ostream& out, const Dataset& data);
Dataset read_sparse(const std::filesystem::path& path,
                    std::optional<std::size_t> dim = std::nullopt,
                    std::optional<int> class_count = std::nullopt);
void write_sparse(const std::filesystem::path& path, const Dataset& data);

// Policy file: one line per feature, "idx add_flag remove_flag" (flags 0/1).
ManipulationPolicy parse_policy(std::istream& in, std::optional<std::size_t> dim = std::nullopt);
void format_policy(std::ostream& out, const ManipulationPolicy& policy);
ManipulationPolicy read_policy(const std::filesystem::path& path,
                               std::optional<std::size_t> dim = std::nullopt);
void write_policy(const std::filesystem::path& path, const ManipulationPolicy& policy);

}  // namespace advmal
