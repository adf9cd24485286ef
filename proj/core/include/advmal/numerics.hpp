#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advmal/errors.hpp"

namespace advmal {

/// Row-major dense matrix of doubles.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols, cols};
  }

  bool operator==(const DenseMatrix&) const = default;
};

enum class Activation { kRelu, kElu, kSigmoid, kLinear };

std::string_view to_string(Activation a);
/// Accepts "relu", "elu", "sigmoid", "linear"; throws ConfigError otherwise.
Activation parse_activation(std::string_view name);

struct Layer {
  DenseMatrix weights;  // fan_out x fan_in
  std::vector<double> bias;

  bool operator==(const Layer&) const = default;
};

struct LayerGradient {
  DenseMatrix weights;
  std::vector<double> bias;
};

/// Gradients of a scalar objective with respect to every parameter of an
/// `Mlp` and with respect to its input. Layer gradients are empty when only
/// the input gradient was requested.
struct GradientBundle {
  std::vector<LayerGradient> layers;
  std::vector<double> input_grad;

  /// Parameter gradients in the same order as `Mlp::flatten_params`.
  std::vector<double> flatten_params() const;
};

/// Per-layer values retained by a forward pass for backpropagation.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;  // [0] is the input
  std::vector<std::vector<double>> pre_activations;

  std::span<const double> output() const { return activations.back(); }
};

/// Fully-connected feed-forward network. Hidden layers share one activation;
/// the last layer applies `output_activation` (linear for classifiers, whose
/// output is the logit vector).
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<std::size_t> layer_sizes, Activation hidden,
      Activation output = Activation::kLinear);

  /// Uniform fan-based initialization, zero biases, deterministic per seed.
  void initialize(std::uint64_t seed);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<double> evaluate(std::span<const double> x) const;
  ForwardTrace trace(std::span<const double> x) const;

  /// Backpropagates `upstream` (d objective / d output) through a trace.
  GradientBundle backward(const ForwardTrace& trace,
                          std::span<const double> upstream,
                          bool parameter_grads = true) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten_params() const;
  void assign_params(std::span<const double> params);

  /// Throws ShapeError unless the layer list matches `layer_sizes` and every
  /// parameter is finite.
  void validate() const;

  bool operator==(const Mlp&) const = default;

 private:
  std::vector<std::size_t> sizes_;
  Activation hidden_ = Activation::kRelu;
  Activation output_ = Activation::kLinear;
  std::vector<Layer> layers_;
};

std::vector<double> softmax(std::span<const double> logits);

/// Probability floor applied inside the log of `cross_entropy`.
inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label], 1e-12)). Throws std::out_of_range for a bad label.
double cross_entropy(std::span<const double> probs, int label);

/// Raw last-layer output of a classifier network.
std::vector<double> logits(const Mlp& model, std::span<const double> x);
/// Softmax of the logits.
std::vector<double> forward(const Mlp& model, std::span<const double> x);
/// Exact gradients of cross_entropy(forward(x), label).
GradientBundle backward(const Mlp& model, std::span<const double> x, int label);

enum class Direction { kMinimize, kMaximize };

struct AdamState {
  std::size_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t size, double lr)
      : first_moment(size, 0.0), second_moment(size, 0.0), learning_rate(lr) {}
};

/// One bias-corrected Adam update in place. kMaximize ascends `grads`.
void adam_step(AdamState& state, std::span<double> variables,
               std::span<const double> grads, Direction direction);

}  // namespace advmal
