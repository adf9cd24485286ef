#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "advmal/numerics.hpp"

namespace advmal {

/// Maps a logit vector to d objective / d logits.
using LogitGradientFn = std::function<std::vector<double>(std::span<const double>)>;

/// A differentiable classifier as seen by attacks and evaluation: logits,
/// softmax probabilities and input gradients of arbitrary logit objectives.
/// Implementations are immutable after construction and safe to share
/// read-only across threads.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t class_count() const = 0;

  virtual std::vector<double> logits(std::span<const double> x) const = 0;

  /// One forward and one backward pass: evaluates the logits at `x`, asks
  /// `upstream` for the objective's gradient w.r.t. those logits and returns
  /// the objective's gradient w.r.t. `x`. The logits are stored in
  /// `logits_out` when non-null.
  virtual std::vector<double> input_gradient(std::span<const double> x,
                                             const LogitGradientFn& upstream,
                                             std::vector<double>* logits_out = nullptr) const = 0;

  virtual std::vector<double> probabilities(std::span<const double> x) const {
    return softmax(logits(x));
  }

  int predict(std::span<const double> x) const;
  double loss(std::span<const double> x, int label) const;

  /// Gradient of the cross-entropy loss w.r.t. the input; the loss value is
  /// written to `loss_out` when non-null.
  std::vector<double> loss_gradient(std::span<const double> x, int label,
                                    double* loss_out = nullptr) const;};

/// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

/// Non-owning adapter exposing a bare classifier network as a Classifier.
class MlpClassifierView final : public Classifier {
 public:
  explicit MlpClassifierView(const Mlp& model) : model_(&model) {}

  std::size_t input_dim() const override { return model_->input_dim(); }
  std::size_t class_count() const override { return model_->output_dim(); }
  std::vector<double> logits(std::span<const double> x) const override;
  std::vector<double> input_gradient(std::span<const double> x,
                                     const LogitGradientFn& upstream,
                                     std::vector<double>* logits_out = nullptr) const override;

 private:
  const Mlp* model_;
};

}  // namespace advmal
