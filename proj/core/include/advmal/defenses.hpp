#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "advmal/classifier.hpp"
#include "advmal/datamodel.hpp"
#include "advmal/numerics.hpp"
#include "advmal/random.hpp"

namespace advmal {

/// Sets a uniformly chosen floor(ratio * dim) subset of coordinates to 0 or
/// 1 with equal probability.
FeatureVector salt_pepper(std::span<const double> x, double ratio, Rng& rng);
FeatureVector salt_pepper(std::span<const double> x, double ratio, std::uint64_t seed);

/// One-hidden-layer autoencoder: sigmoid encoder dim -> latent, sigmoid
/// decoder latent -> dim.
struct DenoisingAutoencoder {
  Mlp encoder;
  Mlp decoder;

  DenoisingAutoencoder() = default;
  DenoisingAutoencoder(std::size_t dim, std::size_t latent);

  static std::size_t default_latent(std::size_t dim) { return dim < 160 ? dim : 160; }

  void initialize(std::uint64_t seed);
  std::size_t input_dim() const { return encoder.input_dim(); }
  std::size_t latent_dim() const { return encoder.output_dim(); }
  std::vector<double> encode(std::span<const double> x) const { return encoder.evaluate(x); }
  std::vector<double> reconstruct(std::span<const double> x) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten_params() const;  // encoder then decoder
  void assign_params(std::span<const double> params);

  bool operator==(const DenoisingAutoencoder&) const = default;
};

using Reconstructor = std::function<std::vector<double>(std::span<const double>)>;

double mean_squared_error(std::span<const double> a, std::span<const double> b);

/// MSE(x_clean, ae(x_noisy)) + MSE(x_clean, ae(x_adv)).
double dae_loss(const Reconstructor& ae, std::span<const double> x_clean,
                std::span<const double> x_noisy, std::span<const double> x_adv);
double dae_loss(const DenoisingAutoencoder& ae, std::span<const double> x_clean,
                std::span<const double> x_noisy, std::span<const double> x_adv);

/// A classifier network optionally preceded by an encoder; no feature
/// selection and no binarization. Non-owning.
class StackedView final : public Classifier {
 public:
  StackedView(const Mlp* encoder, const Mlp& head) : encoder_(encoder), head_(&head) {}

  std::size_t input_dim() const override;
  std::size_t class_count() const override { return head_->output_dim(); }
  std::vector<double> logits(std::span<const double> x) const override;
  std::vector<double> input_gradient(std::span<const double> x, const LogitGradientFn& upstream,
                                     std::vector<double>* logits_out = nullptr) const override;

 private:
  const Mlp* encoder_;
  const Mlp* head_;
};

/// Feature selection -> optional binarization -> optional encoder -> head.
/// Gradients pass through binarization unchanged (straight-through) and are
/// zero on features the model does not read.
class HardenedClassifier final : public Classifier {
 public:
  HardenedClassifier() = default;
  HardenedClassifier(std::size_t input_dim, std::vector<std::size_t> features,
                     std::optional<BinarizationThresholds> thresholds,
                     std::optional<DenoisingAutoencoder> dae, Mlp head);

  std::size_t input_dim() const override { return input_dim_; }
  std::size_t class_count() const override { return head_.output_dim(); }
  std::vector<double> logits(std::span<const double> x) const override;
  std::vector<double> input_gradient(std::span<const double> x, const LogitGradientFn& upstream,
                                     std::vector<double>* logits_out = nullptr) const override;

  const std::vector<std::size_t>& features() const { return features_; }
  const std::optional<BinarizationThresholds>& thresholds() const { return thresholds_; }
  const std::optional<DenoisingAutoencoder>& dae() const { return dae_; }
  const Mlp& head() const { return head_; }

  /// The model's view of `x`: selected and, if enabled, binarized.
  std::vector<double> transform(std::span<const double> x) const;

  bool operator==(const HardenedClassifier& o) const {
    return input_dim_ == o.input_dim_ && features_ == o.features_ &&
           thresholds_ == o.thresholds_ && dae_ == o.dae_ && head_ == o.head_;
  }

 private:
  std::size_t input_dim_ = 0;
  std::vector<std::size_t> features_;
  std::optional<BinarizationThresholds> thresholds_;
  std::optional<DenoisingAutoencoder> dae_;
  Mlp head_;
};

struct InnerMaxConfig {
  double learning_rate = 0.02;
  std::size_t steps = 100;     // T
  std::size_t restarts = 0;    // K
  double noise_ratio_max = 0.1;

  static InnerMaxConfig adversarial_training() { return {0.02, 100, 0, 0.1}; }
  static InnerMaxConfig adversarial_regularization() { return {0.01, 60, 0, 0.1}; }
};

struct InnerMaxResult {
  FeatureVector x_adv;
  std::vector<double> delta;  // continuous endpoint of the chosen trial minus x
  double loss = 0.0;          // cross-entropy at x_adv
  /// Chosen trial (0 starts from x, 1..K from salt-and-pepper starts), or
  /// empty when no rounded endpoint scored above x itself and x was kept.
  std::optional<std::size_t> trial;
  std::vector<double> trial_losses;  // rounded-endpoint loss of every trial
};

/// Adam ascent on the cross-entropy over K+1 starts. With a policy the
/// iterate is clipped to the policy's feasible box and rounded into the
/// manipulation set; with `policy == nullptr` only the unit box applies and
/// rounding is plain 0.5-thresholding.
InnerMaxResult inner_maximize(const Classifier& model, std::span<const double> x, int y,
                              const ManipulationPolicy* policy, const InnerMaxConfig& config,
                              Rng& rng);

/// CE(F(x), y) + CE(F(x_adv), y).
double adversarial_training_loss(const Classifier& model, std::span<const double> x, int y,
                                 std::span<const double> x_adv);

struct DefenseFlags {
  bool adversarial = true;  // run the inner maximizer; off gives plain training
  bool use_dae = false;
  bool use_binarization = false;
  bool known_manipulation_set = true;  // false: box-only inner max
};

struct DefenseConfig {
  InnerMaxConfig inner;
  double subspace_ratio = 1.0;  // Lambda
  std::size_t ensemble_size = 1;
  double data_fraction = 1.0;   // per ensemble member
  double oversample_ratio = 1.0;
  double binarization_threshold = 0.5;
  std::vector<std::size_t> hidden = {160, 160};
  Activation activation = Activation::kRelu;
  std::size_t latent_dim = 0;  // 0 selects DenoisingAutoencoder::default_latent
  std::size_t epochs = 150;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t workers = 1;  // ensemble members trained in parallel
  /// Classes whose examples the inner maximizer perturbs; empty means all.
  /// Other examples enter the min-max loss with x' = x.
  std::vector<int> perturbed_classes;

  bool perturbs(int label) const;
  void validate() const;
};

struct HardenedTrace {
  std::vector<double> epoch_classifier_loss;  // CE(x) + CE(x'), or CE(x) when not adversarial
  std::vector<double> epoch_dae_loss;         // empty without a DAE
};

/// Hardened training of one classifier: oversample, pick a Lambda-fraction
/// feature subspace, binarize, then per mini-batch run the inner maximizer,
/// update the autoencoder on the reconstruction loss and finally update the
/// classifier head on CE(x) + CE(x') with the encoder held fixed.
/// `policy` may be null only when flags.known_manipulation_set is false.
HardenedClassifier train_hardened(const Dataset& data, const ManipulationPolicy* policy,
                                  const DefenseConfig& config, const DefenseFlags& flags,
                                  HardenedTrace* trace = nullptr);

/// Mean of the member probability vectors. Logits are log of that mean, so
/// the inherited loss and gradients describe the averaged distribution.
class EnsembleClassifier final : public Classifier {
 public:
  EnsembleClassifier() = default;
  explicit EnsembleClassifier(std::vector<HardenedClassifier> members);

  std::size_t input_dim() const override;
  std::size_t class_count() const override;
  std::vector<double> logits(std::span<const double> x) const override;
  std::vector<double> probabilities(std::span<const double> x) const override;
  std::vector<double> input_gradient(std::span<const double> x, const LogitGradientFn& upstream,
                                     std::vector<double>* logits_out = nullptr) const override;

  const std::vector<HardenedClassifier>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }

  bool operator==(const EnsembleClassifier& o) const { return members_ == o.members_; }

 private:
  std::vector<HardenedClassifier> members_;
};

/// Seed of ensemble member `member`; its training run is train_hardened
/// with this seed on its data subset.
std::uint64_t ensemble_member_seed(std::uint64_t seed, std::size_t member);

/// Trains config.ensemble_size hardened members, each on its own random
/// Lambda-fraction of features and data_fraction of examples.
EnsembleClassifier train_ensemble(const Dataset& data, const ManipulationPolicy* policy,
                                  const DefenseConfig& config, const DefenseFlags& flags,
                                  std::vector<HardenedTrace>* traces = nullptr);

std::vector<double> ensemble_predict(const EnsembleClassifier& ensemble,
                                     std::span<const double> x);

}  // namespace advmal
