#include "advmal/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "advmal/random.hpp"

namespace advmal {

namespace {

constexpr double kEluAlpha = 1.0;

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? z : 0.0;
    case Activation::kElu: return z > 0.0 ? z : kEluAlpha * std::expm1(z);
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::kLinear: return z;
  }
  return z;
}

// Derivative expressed through both the pre-activation and the output.
double activation_derivative(Activation a, double z, double out) {
  switch (a) {
    case Activation::kRelu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::kElu: return z > 0.0 ? 1.0 : out + kEluAlpha;
    case Activation::kSigmoid: return out * (1.0 - out);
    case Activation::kLinear: return 1.0;
  }
  return 1.0;
}

void check_input(const Mlp& model, std::span<const double> x) {
  if (model.layer_sizes().empty())
    throw ShapeError("network has no layers");
  if (x.size() != model.input_dim())
    throw ShapeError("input has dimension " + std::to_string(x.size()) +
                     ", network expects " + std::to_string(model.input_dim()));
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kElu: return "elu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kLinear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "elu") return Activation::kElu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::vector<double> GradientBundle::flatten_params() const {
  std::vector<double> flat;
  for (const auto& layer : layers) {
    flat.insert(flat.end(), layer.weights.values.begin(), layer.weights.values.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation hidden, Activation output)
    : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw ShapeError("an Mlp needs at least two layer sizes");
  for (std::size_t s : sizes_)
    if (s == 0) throw ShapeError("layer sizes must be positive");
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
    layers_.push_back({DenseMatrix(sizes_[l + 1], sizes_[l]),
                       std::vector<double>(sizes_[l + 1], 0.0)});
}

void Mlp::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows + layer.weights.cols));
    for (double& w : layer.weights.values) w = (2.0 * uniform_unit(rng) - 1.0) * limit;
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

ForwardTrace Mlp::trace(std::span<const double> x) const {
  check_input(*this, x);
  ForwardTrace t;
  t.activations.reserve(layers_.size() + 1);
  t.pre_activations.reserve(layers_.size());
  t.activations.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    const std::vector<double>& in = t.activations.back();
    std::vector<double> z(layer.weights.rows);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      const double* w = layer.weights.values.data() + r * layer.weights.cols;
      double acc = layer.bias[r];
      for (std::size_t c = 0; c < layer.weights.cols; ++c) acc += w[c] * in[c];
      z[r] = acc;
    }
    const Activation a = (l + 1 == layers_.size()) ? output_ : hidden_;
    std::vector<double> out(z.size());
    for (std::size_t r = 0; r < z.size(); ++r) out[r] = activate(a, z[r]);
    t.pre_activations.push_back(std::move(z));
    t.activations.push_back(std::move(out));
  }
  return t;
}

std::vector<double> Mlp::evaluate(std::span<const double> x) const {
  return std::move(trace(x).activations.back());
}

GradientBundle Mlp::backward(const ForwardTrace& trace, std::span<const double> upstream,
                             bool parameter_grads) const {
  if (upstream.size() != output_dim())
    throw ShapeError("upstream gradient does not match the output dimension");
  GradientBundle bundle;
  if (parameter_grads) bundle.layers.resize(layers_.size());

  std::vector<double> grad(upstream.begin(), upstream.end());
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const Activation a = (l + 1 == layers_.size()) ? output_ : hidden_;
    const auto& z = trace.pre_activations[l];
    const auto& out = trace.activations[l + 1];
    const auto& in = trace.activations[l];
    for (std::size_t r = 0; r < grad.size(); ++r)
      grad[r] *= activation_derivative(a, z[r], out[r]);

    if (parameter_grads) {
      LayerGradient& lg = bundle.layers[l];
      lg.weights = DenseMatrix(layer.weights.rows, layer.weights.cols);
      lg.bias = grad;
      for (std::size_t r = 0; r < layer.weights.rows; ++r) {
        const double d = grad[r];
        if (d == 0.0) continue;
        double* gw = lg.weights.values.data() + r * layer.weights.cols;
        for (std::size_t c = 0; c < layer.weights.cols; ++c) gw[c] = d * in[c];
      }
    }

    std::vector<double> next(layer.weights.cols, 0.0);
    for (std::size_t r = 0; r < layer.weights.rows; ++r) {
      const double d = grad[r];
      if (d == 0.0) continue;
      const double* w = layer.weights.values.data() + r * layer.weights.cols;
      for (std::size_t c = 0; c < layer.weights.cols; ++c) next[c] += d * w[c];
    }
    grad = std::move(next);
  }
  bundle.input_grad = std::move(grad);
  return bundle;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.values.size() + layer.bias.size();
  return n;
}

std::vector<double> Mlp::flatten_params() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.weights.values.begin(), layer.weights.values.end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

void Mlp::assign_params(std::span<const double> params) {
  if (params.size() != parameter_count())
    throw ShapeError("parameter vector has the wrong length");
  std::size_t offset = 0;
  for (auto& layer : layers_) {
    std::copy_n(params.begin() + offset, layer.weights.values.size(),
                layer.weights.values.begin());
    offset += layer.weights.values.size();
    std::copy_n(params.begin() + offset, layer.bias.size(), layer.bias.begin());
    offset += layer.bias.size();
  }
}

void Mlp::validate() const {
  if (sizes_.size() < 2 || layers_.size() + 1 != sizes_.size())
    throw ShapeError("layer list does not match layer sizes");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.weights.rows != sizes_[l + 1] || layer.weights.cols != sizes_[l] ||
        layer.weights.values.size() != layer.weights.rows * layer.weights.cols ||
        layer.bias.size() != sizes_[l + 1])
      throw ShapeError("layer " + std::to_string(l) + " has inconsistent shape");
    for (double w : layer.weights.values)
      if (!std::isfinite(w)) throw ShapeError("non-finite weight");
    for (double b : layer.bias)
      if (!std::isfinite(b)) throw ShapeError("non-finite bias");
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double peak = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (double& v : p) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : p) v /= total;
  return p;
}

double cross_entropy(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw std::out_of_range("label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbabilityFloor));
}

std::vector<double> logits(const Mlp& model, std::span<const double> x) {
  return model.evaluate(x);
}

std::vector<double> forward(const Mlp& model, std::span<const double> x) {
  return softmax(model.evaluate(x));
}

GradientBundle backward(const Mlp& model, std::span<const double> x, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= model.output_dim())
    throw std::out_of_range("label " + std::to_string(label) + " out of range");
  ForwardTrace t = model.trace(x);
  std::vector<double> upstream = softmax(t.output());
  upstream[static_cast<std::size_t>(label)] -= 1.0;
  return model.backward(t, upstream);
}

void adam_step(AdamState& state, std::span<double> variables,
               std::span<const double> grads, Direction direction) {
  if (variables.size() != grads.size() || state.first_moment.size() != grads.size() ||
      state.second_moment.size() != grads.size())
    throw ShapeError("adam_step: shapes disagree");
  ++state.step;
  const double sign = direction == Direction::kMaximize ? -1.0 : 1.0;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < variables.size(); ++i) {
    const double g = sign * grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    variables[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace advmal
