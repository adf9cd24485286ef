#include "advmal/datamodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "advmal/random.hpp"

namespace advmal {

namespace {

void check_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ShapeError(std::string(what) + ": dimension " + std::to_string(a) +
                     " does not match " + std::to_string(b));
}

}  // namespace

void Dataset::validate() const {
  if (examples.size() != labels.size())
    throw ShapeError("dataset has " + std::to_string(examples.size()) + " examples but " +
                     std::to_string(labels.size()) + " labels");
  if (class_count < 1) throw std::out_of_range("class_count must be positive");
  for (std::size_t i = 0; i < examples.size(); ++i) {
    check_dims(examples[i].size(), dim, "dataset example");
    for (double v : examples[i])
      if (!(v >= 0.0 && v <= 1.0))
        throw std::out_of_range("example " + std::to_string(i) + " has a value outside [0,1]");
    if (labels[i] < 0 || labels[i] >= class_count)
      throw std::out_of_range("example " + std::to_string(i) + " has label " +
                              std::to_string(labels[i]) + " outside the label space");
  }
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(class_count, 0)), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_count = class_count;
  out.dim = dim;
  out.examples.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.examples.push_back(examples.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

Dataset Dataset::select_features(std::span<const std::size_t> features) const {
  Dataset out;
  out.class_count = class_count;
  out.dim = features.size();
  out.labels = labels;
  out.examples.reserve(examples.size());
  for (const auto& x : examples) {
    FeatureVector v(features.size());
    for (std::size_t j = 0; j < features.size(); ++j) v[j] = x.at(features[j]);
    out.examples.push_back(std::move(v));
  }
  return out;
}

ManipulationPolicy ManipulationPolicy::all_allowed(std::size_t dim) {
  return {std::vector<bool>(dim, true), std::vector<bool>(dim, true)};
}

ManipulationPolicy ManipulationPolicy::additions_only(std::size_t dim) {
  return {std::vector<bool>(dim, true), std::vector<bool>(dim, false)};
}

ManipulationPolicy ManipulationPolicy::none_allowed(std::size_t dim) {
  return {std::vector<bool>(dim, false), std::vector<bool>(dim, false)};
}

ManipulationPolicy ManipulationPolicy::restrict_to(std::span<const std::size_t> features) const {
  ManipulationPolicy out;
  out.addition_allowed.reserve(features.size());
  out.removal_allowed.reserve(features.size());
  for (std::size_t f : features) {
    out.addition_allowed.push_back(addition_allowed.at(f));
    out.removal_allowed.push_back(removal_allowed.at(f));
  }
  return out;
}

FeatureVector binarize(std::span<const double> x, const BinarizationThresholds& theta) {
  check_dims(x.size(), theta.theta.size(), "binarize");
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] < theta.theta[i] ? 0.0 : 1.0;
  return out;
}

bool is_binary(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

bool admissible(std::span<const double> x, std::span<const double> x_adv,
                const ManipulationPolicy& policy) {
  check_dims(x_adv.size(), x.size(), "admissible");
  check_dims(policy.dim(), x.size(), "admissible policy");
  if (!is_binary(x) || !is_binary(x_adv))
    throw std::invalid_argument("admissible: inputs must be binary");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] != x_adv[i] && !policy.can_flip(i, x[i])) return false;
  return true;
}

FeatureVector project_to_m(std::span<const double> x, std::span<const double> x_cont,
                           const ManipulationPolicy& policy) {
  check_dims(x_cont.size(), x.size(), "project_to_m");
  check_dims(policy.dim(), x.size(), "project_to_m policy");
  FeatureVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double rounded = std::clamp(x_cont[i], 0.0, 1.0) >= 0.5 ? 1.0 : 0.0;
    out[i] = (rounded != x[i] && !policy.can_flip(i, x[i])) ? x[i] : rounded;
  }
  return out;
}

Dataset oversample(const Dataset& data, double ratio, std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("oversample: empty dataset");
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw std::invalid_argument("oversample: ratio must lie in (0, 1]");
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < data.size(); ++i)
    members[static_cast<std::size_t>(data.labels[i])].push_back(i);
  std::size_t largest = 0;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty())
      throw std::invalid_argument("oversample: class " + std::to_string(c) + " is empty");
    largest = std::max(largest, members[c].size());
  }
  const auto floor_count =
      static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(largest) - 1e-9));

  Dataset out = data;
  Rng rng(seed);
  for (const auto& idx : members) {
    for (std::size_t n = idx.size(); n < floor_count; ++n) {
      std::size_t pick = idx[uniform_index(rng, idx.size())];
      out.examples.push_back(data.examples[pick]);
      out.labels.push_back(data.labels[pick]);
    }
  }
  return out;
}

DatasetSplit split(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw std::invalid_argument("split: fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw std::invalid_argument("split: fractions must sum to 1");

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(data.class_count));
  for (std::size_t i = 0; i < data.size(); ++i)
    members.at(static_cast<std::size_t>(data.labels[i])).push_back(i);

  Rng rng(seed);
  std::array<std::vector<std::size_t>, 3> parts;
  for (auto& idx : members) {
    shuffle(rng, std::span<std::size_t>(idx));
    const double n = static_cast<double>(idx.size());
    const auto b1 = static_cast<std::size_t>(std::llround(fractions[0] * n));
    const auto b2 = std::max(
        b1, static_cast<std::size_t>(std::llround((fractions[0] + fractions[1]) * n)));
    parts[0].insert(parts[0].end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(b1));
    parts[1].insert(parts[1].end(), idx.begin() + static_cast<std::ptrdiff_t>(b1),
                    idx.begin() + static_cast<std::ptrdiff_t>(b2));
    parts[2].insert(parts[2].end(), idx.begin() + static_cast<std::ptrdiff_t>(b2), idx.end());
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return {data.subset(parts[0]), data.subset(parts[1]), data.subset(parts[2])};
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.dim < 2) throw ConfigError("synthetic data needs dim >= 2");
  if (spec.classes < 2) throw ConfigError("synthetic data needs at least two classes");
  if (spec.per_class.size() != static_cast<std::size_t>(spec.classes))
    throw ConfigError("per_class must list one count per class");
  if (!(spec.flip_noise >= 0.0 && spec.flip_noise <= 1.0))
    throw ConfigError("flip_noise must lie in [0, 1]");

  SyntheticData out;
  Rng proto_rng(derive_seed(spec.seed, 0));
  for (int c = 0; c < spec.classes; ++c) {
    FeatureVector p(spec.dim);
    for (double& v : p) v = bernoulli(proto_rng, spec.prototype_density) ? 1.0 : 0.0;
    out.prototypes.push_back(std::move(p));
  }

  Dataset& data = out.data;
  data.dim = spec.dim;
  data.class_count = spec.classes;
  Rng noise_rng(derive_seed(spec.seed, 1));
  for (int c = 0; c < spec.classes; ++c) {
    const FeatureVector& proto = out.prototypes[static_cast<std::size_t>(c)];
    for (std::size_t n = 0; n < spec.per_class[static_cast<std::size_t>(c)]; ++n) {
      FeatureVector x = proto;
      for (double& v : x)
        if (bernoulli(noise_rng, spec.flip_noise)) v = 1.0 - v;
      data.examples.push_back(std::move(x));
      data.labels.push_back(c);
    }
  }
  Rng order_rng(derive_seed(spec.seed, 2));
  std::vector<std::size_t> order = random_permutation(order_rng, data.size());
  data = data.subset(order);

  Rng policy_rng(derive_seed(spec.seed, 3));
  out.policy.addition_allowed.resize(spec.dim);
  out.policy.removal_allowed.resize(spec.dim);
  for (std::size_t i = 0; i < spec.dim; ++i) {
    out.policy.addition_allowed[i] = bernoulli(policy_rng, spec.addition_fraction);
    out.policy.removal_allowed[i] = bernoulli(policy_rng, spec.removal_fraction);
  }
  return out;
}

}  // namespace advmal
