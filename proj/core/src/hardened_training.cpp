#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "advmal/defenses.hpp"
#include "advmal/parallel.hpp"
#include "advmal/training.hpp"

namespace advmal {

namespace {

// Seed streams of one hardened training run.
enum Stream : std::uint64_t {
  kOversample = 0,
  kSubspace = 1,
  kHeadInit = 2,
  kDaeInit = 3,
  kBatches = 4,
  kNoise = 5,
  kDataSubset = 6,
};

void add_scaled(std::vector<double>& acc, const std::vector<double>& g, double scale) {
  for (std::size_t p = 0; p < acc.size(); ++p) acc[p] += scale * g[p];
}

// d/dparams of MSE(target, ae(input)), encoder block first.
std::vector<double> reconstruction_gradient(const DenoisingAutoencoder& ae,
                                            std::span<const double> target,
                                            std::span<const double> input) {
  const ForwardTrace enc = ae.encoder.trace(input);
  const ForwardTrace dec = ae.decoder.trace(enc.output());
  const auto out = dec.output();
  std::vector<double> up(out.size());
  const double scale = 2.0 / static_cast<double>(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) up[i] = scale * (out[i] - target[i]);
  const GradientBundle gd = ae.decoder.backward(dec, up, true);
  std::vector<double> grad = ae.encoder.backward(enc, gd.input_grad, true).flatten_params();
  const std::vector<double> d = gd.flatten_params();
  grad.insert(grad.end(), d.begin(), d.end());
  return grad;
}

std::vector<std::size_t> choose_subspace(std::size_t dim, double ratio, std::uint64_t seed) {
  std::vector<std::size_t> features;
  if (ratio >= 1.0) {
    features.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) features[i] = i;
    return features;
  }
  const auto k = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(dim)));
  if (k == 0) throw ConfigError("subspace ratio selects no features");
  Rng rng(seed);
  features = sample_without_replacement(rng, dim, k);
  std::sort(features.begin(), features.end());
  return features;
}

}  // namespace

bool DefenseConfig::perturbs(int label) const {
  return perturbed_classes.empty() ||
         std::find(perturbed_classes.begin(), perturbed_classes.end(), label) !=
             perturbed_classes.end();
}

void DefenseConfig::validate() const {
  if (!(subspace_ratio > 0.0 && subspace_ratio <= 1.0))
    throw ConfigError("subspace_ratio must lie in (0, 1]");
  if (!(data_fraction > 0.0 && data_fraction <= 1.0))
    throw ConfigError("data_fraction must lie in (0, 1]");
  if (!(oversample_ratio >= 0.0 && oversample_ratio <= 1.0))
    throw ConfigError("oversample_ratio must lie in [0, 1] (0 disables oversampling)");
  if (ensemble_size == 0) throw ConfigError("ensemble_size must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(inner.learning_rate > 0.0)) throw ConfigError("inner learning rate must be positive");
  if (!(inner.noise_ratio_max >= 0.0 && inner.noise_ratio_max <= 1.0))
    throw ConfigError("noise_ratio_max must lie in [0, 1]");
  if (!std::isfinite(binarization_threshold)) throw ConfigError("threshold must be finite");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
}

HardenedClassifier train_hardened(const Dataset& data, const ManipulationPolicy* policy,
                                  const DefenseConfig& config, const DefenseFlags& flags,
                                  HardenedTrace* trace) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train_hardened: empty dataset");
  data.validate();
  if (policy && policy->dim() != data.dim)
    throw ShapeError("train_hardened: policy dimension does not match the data");
  if (flags.adversarial && flags.known_manipulation_set && !policy)
    throw std::invalid_argument("train_hardened: adversarial training needs a policy");

  Dataset work = config.oversample_ratio > 0.0
                     ? oversample(data, config.oversample_ratio,
                                  derive_seed(config.seed, kOversample))
                     : data;
  std::vector<std::size_t> features =
      choose_subspace(data.dim, config.subspace_ratio, derive_seed(config.seed, kSubspace));
  if (features.size() < data.dim) work = work.select_features(features);
  const std::size_t dim = features.size();

  const ManipulationPolicy sub_policy =
      policy ? (features.size() < data.dim ? policy->restrict_to(features) : *policy)
             : ManipulationPolicy::all_allowed(dim);
  const ManipulationPolicy* inner_policy = flags.known_manipulation_set ? &sub_policy : nullptr;

  std::optional<BinarizationThresholds> thresholds;
  if (flags.use_binarization) {
    thresholds = BinarizationThresholds::uniform(dim, config.binarization_threshold);
    for (FeatureVector& x : work.examples) x = binarize(x, *thresholds);
  }

  std::optional<DenoisingAutoencoder> dae;
  if (flags.use_dae) {
    dae.emplace(dim, config.latent_dim ? config.latent_dim
                                       : DenoisingAutoencoder::default_latent(dim));
    dae->initialize(derive_seed(config.seed, kDaeInit));
  }

  std::vector<std::size_t> sizes{dae ? dae->latent_dim() : dim};
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(static_cast<std::size_t>(data.class_count));
  Mlp head(sizes, config.activation);
  head.initialize(derive_seed(config.seed, kHeadInit));

  Rng batch_rng(derive_seed(config.seed, kBatches));
  Rng noise_rng(derive_seed(config.seed, kNoise));
  AdamState head_adam(head.parameter_count(), config.learning_rate);
  std::vector<double> head_params = head.flatten_params();
  AdamState dae_adam(dae ? dae->parameter_count() : 0, config.learning_rate);
  std::vector<double> dae_params = dae ? dae->flatten_params() : std::vector<double>{};

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(batch_rng, work.size());
    double clf_sum = 0.0;
    double dae_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);

      std::vector<FeatureVector> adv;
      adv.reserve(stop - start);
      {
        const StackedView model(dae ? &dae->encoder : nullptr, head);
        for (std::size_t k = start; k < stop; ++k) {
          const std::size_t i = order[k];
          if (flags.adversarial && config.perturbs(work.labels[i]))
            adv.push_back(inner_maximize(model, work.examples[i], work.labels[i], inner_policy,
                                         config.inner, noise_rng)
                              .x_adv);
          else
            adv.push_back(work.examples[i]);
        }
      }

      if (dae) {
        std::vector<double> grad(dae_params.size(), 0.0);
        double loss = 0.0;
        for (std::size_t k = start; k < stop; ++k) {
          const FeatureVector& x = work.examples[order[k]];
          const FeatureVector noisy = salt_pepper(x, config.inner.noise_ratio_max, noise_rng);
          const FeatureVector& x_adv = adv[k - start];
          loss += dae_loss(*dae, x, noisy, x_adv);
          add_scaled(grad, reconstruction_gradient(*dae, x, noisy), scale);
          add_scaled(grad, reconstruction_gradient(*dae, x, x_adv), scale);
        }
        adam_step(dae_adam, dae_params, grad, Direction::kMinimize);
        dae->assign_params(dae_params);
        dae_sum += loss * scale;
      }

      std::vector<double> grad(head_params.size(), 0.0);
      double loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const int y = work.labels[order[k]];
        // Without the inner maximizer the second term would only duplicate
        // the first, so plain training keeps the single cross-entropy.
        const FeatureVector* inputs[2] = {&work.examples[order[k]], &adv[k - start]};
        for (std::size_t n = 0; n < (flags.adversarial ? 2u : 1u); ++n) {
          const FeatureVector& v = *inputs[n];
          const std::vector<double> in = dae ? dae->encode(v) : v;
          loss += cross_entropy(forward(head, in), y);
          add_scaled(grad, backward(head, in, y).flatten_params(), scale);
        }
      }
      adam_step(head_adam, head_params, grad, Direction::kMinimize);
      head.assign_params(head_params);
      clf_sum += loss * scale;
      ++batches;
    }
    if (trace) {
      trace->epoch_classifier_loss.push_back(clf_sum / static_cast<double>(batches));
      if (dae) trace->epoch_dae_loss.push_back(dae_sum / static_cast<double>(batches));
    }
  }
  return HardenedClassifier(data.dim, std::move(features), std::move(thresholds), std::move(dae),
                            std::move(head));
}

std::uint64_t ensemble_member_seed(std::uint64_t seed, std::size_t member) {
  return derive_seed(seed, 100 + member);
}

EnsembleClassifier train_ensemble(const Dataset& data, const ManipulationPolicy* policy,
                                  const DefenseConfig& config, const DefenseFlags& flags,
                                  std::vector<HardenedTrace>* traces) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("train_ensemble: empty dataset");
  std::vector<HardenedClassifier> members(config.ensemble_size);
  std::vector<HardenedTrace> member_traces(config.ensemble_size);
  parallel_for(config.ensemble_size, resolve_workers(config.workers), [&](std::size_t m) {
    DefenseConfig member = config;
    member.seed = ensemble_member_seed(config.seed, m);
    member.ensemble_size = 1;
    if (config.data_fraction < 1.0) {
      const auto count = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::llround(config.data_fraction * static_cast<double>(data.size()))));
      Rng rng(derive_seed(member.seed, kDataSubset));
      std::vector<std::size_t> rows = sample_without_replacement(rng, data.size(), count);
      std::sort(rows.begin(), rows.end());
      members[m] = train_hardened(data.subset(rows), policy, member, flags, &member_traces[m]);
    } else {
      members[m] = train_hardened(data, policy, member, flags, &member_traces[m]);
    }
  });
  if (traces) *traces = std::move(member_traces);
  return EnsembleClassifier(std::move(members));
}

}  // namespace advmal
