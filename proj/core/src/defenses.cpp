#include "advmal/defenses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "advmal/attacks.hpp"

namespace advmal {

FeatureVector salt_pepper(std::span<const double> x, double ratio, Rng& rng) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw std::invalid_argument("salt_pepper: ratio must lie in [0, 1]");
  FeatureVector out(x.begin(), x.end());
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(x.size())));
  for (std::size_t i : sample_without_replacement(rng, x.size(), count))
    out[i] = bernoulli(rng, 0.5) ? 1.0 : 0.0;
  return out;
}

FeatureVector salt_pepper(std::span<const double> x, double ratio, std::uint64_t seed) {
  Rng rng(seed);
  return salt_pepper(x, ratio, rng);
}

DenoisingAutoencoder::DenoisingAutoencoder(std::size_t dim, std::size_t latent)
    : encoder({dim, latent}, Activation::kSigmoid, Activation::kSigmoid),
      decoder({latent, dim}, Activation::kSigmoid, Activation::kSigmoid) {}

void DenoisingAutoencoder::initialize(std::uint64_t seed) {
  encoder.initialize(derive_seed(seed, 0));
  decoder.initialize(derive_seed(seed, 1));
}

std::vector<double> DenoisingAutoencoder::reconstruct(std::span<const double> x) const {
  return decoder.evaluate(encoder.evaluate(x));
}

std::size_t DenoisingAutoencoder::parameter_count() const {
  return encoder.parameter_count() + decoder.parameter_count();
}

std::vector<double> DenoisingAutoencoder::flatten_params() const {
  std::vector<double> out = encoder.flatten_params();
  const std::vector<double> d = decoder.flatten_params();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

void DenoisingAutoencoder::assign_params(std::span<const double> params) {
  if (params.size() != parameter_count())
    throw ShapeError("autoencoder: expected " + std::to_string(parameter_count()) +
                     " parameters, got " + std::to_string(params.size()));
  encoder.assign_params(params.first(encoder.parameter_count()));
  decoder.assign_params(params.subspan(encoder.parameter_count()));
}

double mean_squared_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("mean_squared_error: dimension mismatch");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

double dae_loss(const Reconstructor& ae, std::span<const double> x_clean,
                std::span<const double> x_noisy, std::span<const double> x_adv) {
  if (x_noisy.size() != x_clean.size() || x_adv.size() != x_clean.size())
    throw ShapeError("dae_loss: dimension mismatch");
  return mean_squared_error(x_clean, ae(x_noisy)) + mean_squared_error(x_clean, ae(x_adv));
}

double dae_loss(const DenoisingAutoencoder& ae, std::span<const double> x_clean,
                std::span<const double> x_noisy, std::span<const double> x_adv) {
  return dae_loss([&](std::span<const double> v) { return ae.reconstruct(v); }, x_clean,
                  x_noisy, x_adv);
}

std::size_t StackedView::input_dim() const {
  return encoder_ ? encoder_->input_dim() : head_->input_dim();
}

std::vector<double> StackedView::logits(std::span<const double> x) const {
  if (!encoder_) return head_->evaluate(x);
  return head_->evaluate(encoder_->evaluate(x));
}

std::vector<double> StackedView::input_gradient(std::span<const double> x,
                                                const LogitGradientFn& upstream,
                                                std::vector<double>* logits_out) const {
  if (!encoder_) return MlpClassifierView(*head_).input_gradient(x, upstream, logits_out);
  const ForwardTrace enc = encoder_->trace(x);
  const ForwardTrace head = head_->trace(enc.output());
  const std::vector<double> dz = upstream(head.output());
  if (logits_out) logits_out->assign(head.output().begin(), head.output().end());
  const std::vector<double> dh = head_->backward(head, dz, false).input_grad;
  return encoder_->backward(enc, dh, false).input_grad;
}

HardenedClassifier::HardenedClassifier(std::size_t input_dim, std::vector<std::size_t> features,
                                       std::optional<BinarizationThresholds> thresholds,
                                       std::optional<DenoisingAutoencoder> dae, Mlp head)
    : input_dim_(input_dim),
      features_(std::move(features)),
      thresholds_(std::move(thresholds)),
      dae_(std::move(dae)),
      head_(std::move(head)) {
  if (features_.empty()) throw ShapeError("hardened classifier reads no features");
  for (std::size_t f : features_)
    if (f >= input_dim_) throw ShapeError("hardened classifier feature index out of range");
  if (thresholds_ && thresholds_->theta.size() != features_.size())
    throw ShapeError("binarization thresholds do not match the feature subset");
  const std::size_t head_in = dae_ ? dae_->latent_dim() : features_.size();
  if (dae_ && dae_->input_dim() != features_.size())
    throw ShapeError("autoencoder input does not match the feature subset");
  if (head_.input_dim() != head_in) throw ShapeError("classifier head input size mismatch");
}

std::vector<double> HardenedClassifier::transform(std::span<const double> x) const {
  if (x.size() != input_dim_)
    throw ShapeError("hardened classifier expects dimension " + std::to_string(input_dim_) +
                     ", got " + std::to_string(x.size()));
  std::vector<double> v(features_.size());
  for (std::size_t j = 0; j < features_.size(); ++j) v[j] = x[features_[j]];
  if (thresholds_) return binarize(v, *thresholds_);
  return v;
}

std::vector<double> HardenedClassifier::logits(std::span<const double> x) const {
  return StackedView(dae_ ? &dae_->encoder : nullptr, head_).logits(transform(x));
}

std::vector<double> HardenedClassifier::input_gradient(std::span<const double> x,
                                                       const LogitGradientFn& upstream,
                                                       std::vector<double>* logits_out) const {
  const std::vector<double> local = StackedView(dae_ ? &dae_->encoder : nullptr, head_)
                                        .input_gradient(transform(x), upstream, logits_out);
  std::vector<double> grad(input_dim_, 0.0);
  for (std::size_t j = 0; j < features_.size(); ++j) grad[features_[j]] += local[j];
  return grad;
}

InnerMaxResult inner_maximize(const Classifier& model, std::span<const double> x, int y,
                              const ManipulationPolicy* policy, const InnerMaxConfig& config,
                              Rng& rng) {
  const std::size_t dim = x.size();
  if (model.input_dim() != dim) throw ShapeError("inner_maximize: model dimension mismatch");
  if (!(config.learning_rate > 0.0))
    throw std::invalid_argument("inner_maximize: learning rate must be positive");
  const ManipulationPolicy open = ManipulationPolicy::all_allowed(dim);
  const ManipulationPolicy& pol = policy ? *policy : open;
  const FeasibleBox box = FeasibleBox::from(x, pol);

  InnerMaxResult best;
  best.x_adv.assign(x.begin(), x.end());
  best.delta.assign(dim, 0.0);
  best.loss = model.loss(x, y);

  for (std::size_t r = 0; r <= config.restarts; ++r) {
    std::vector<double> point(x.begin(), x.end());
    if (r > 0) point = salt_pepper(x, uniform_unit(rng) * config.noise_ratio_max, rng);
    box.clip(point);
    std::vector<double> delta(dim);
    for (std::size_t i = 0; i < dim; ++i) delta[i] = point[i] - x[i];

    AdamState adam(dim, config.learning_rate);
    for (std::size_t t = 0; t < config.steps; ++t) {
      const std::vector<double> g = model.loss_gradient(point, y);
      adam_step(adam, delta, g, Direction::kMaximize);
      for (std::size_t i = 0; i < dim; ++i) point[i] = x[i] + delta[i];
      box.clip(point);
      for (std::size_t i = 0; i < dim; ++i) delta[i] = point[i] - x[i];
    }
    FeatureVector rounded = project_to_m(x, point, pol);
    const double loss = model.loss(rounded, y);
    best.trial_losses.push_back(loss);
    if (loss > best.loss) {
      best.x_adv = std::move(rounded);
      best.delta = std::move(delta);
      best.loss = loss;
      best.trial = r;
    }
  }
  return best;
}

double adversarial_training_loss(const Classifier& model, std::span<const double> x, int y,
                                 std::span<const double> x_adv) {
  return model.loss(x, y) + model.loss(x_adv, y);
}

EnsembleClassifier::EnsembleClassifier(std::vector<HardenedClassifier> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw std::invalid_argument("ensemble needs at least one member");
  for (const auto& m : members_)
    if (m.input_dim() != members_.front().input_dim() ||
        m.class_count() != members_.front().class_count())
      throw ShapeError("ensemble members disagree on input or output size");
}

std::size_t EnsembleClassifier::input_dim() const { return members_.at(0).input_dim(); }
std::size_t EnsembleClassifier::class_count() const { return members_.at(0).class_count(); }

std::vector<double> EnsembleClassifier::probabilities(std::span<const double> x) const {
  std::vector<double> mean(class_count(), 0.0);
  for (const auto& m : members_) {
    const std::vector<double> p = m.probabilities(x);
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += p[k];
  }
  for (double& v : mean) v /= static_cast<double>(members_.size());
  return mean;
}

std::vector<double> EnsembleClassifier::logits(std::span<const double> x) const {
  std::vector<double> z = probabilities(x);
  for (double& v : z) v = std::log(std::max(v, 1e-300));
  return z;
}

std::vector<double> EnsembleClassifier::input_gradient(std::span<const double> x,
                                                       const LogitGradientFn& upstream,
                                                       std::vector<double>* logits_out) const {
  std::vector<std::vector<double>> member_p;
  std::vector<double> mean(class_count(), 0.0);
  for (const auto& m : members_) {
    member_p.push_back(m.probabilities(x));
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += member_p.back()[k];
  }
  const double inv_l = 1.0 / static_cast<double>(members_.size());
  std::vector<double> z(mean.size());
  for (std::size_t k = 0; k < mean.size(); ++k) {
    mean[k] *= inv_l;
    z[k] = std::log(std::max(mean[k], 1e-300));
  }
  const std::vector<double> dz = upstream(z);
  if (logits_out) *logits_out = z;
  // d/dp_bar of the objective, since z = log p_bar.
  std::vector<double> w(mean.size());
  for (std::size_t k = 0; k < mean.size(); ++k) w[k] = dz[k] / std::max(mean[k], 1e-300);

  std::vector<double> grad(input_dim(), 0.0);
  for (std::size_t i = 0; i < members_.size(); ++i) {
    const std::vector<double>& p = member_p[i];
    double pw = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) pw += p[k] * w[k];
    // Softmax Jacobian-vector product, scaled by the vote weight.
    std::vector<double> v(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) v[k] = inv_l * p[k] * (w[k] - pw);
    const std::vector<double> g =
        members_[i].input_gradient(x, [&](std::span<const double>) { return v; });
    for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
  }
  return grad;
}

std::vector<double> ensemble_predict(const EnsembleClassifier& ensemble,
                                     std::span<const double> x) {
  return ensemble.probabilities(x);
}

}  // namespace advmal
