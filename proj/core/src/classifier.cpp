#include "advmal/classifier.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace advmal {

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

int Classifier::predict(std::span<const double> x) const {
  return static_cast<int>(argmax(probabilities(x)));
}

double Classifier::loss(std::span<const double> x, int label) const {
  return cross_entropy(probabilities(x), label);
}

std::vector<double> Classifier::loss_gradient(std::span<const double> x, int label,
                                              double* loss_out) const {
  if (label < 0 || static_cast<std::size_t>(label) >= class_count())
    throw std::out_of_range("label " + std::to_string(label) + " out of range");
  const auto y = static_cast<std::size_t>(label);
  return input_gradient(x, [&](std::span<const double> z) {
    std::vector<double> p = softmax(z);
    if (loss_out) *loss_out = cross_entropy(p, label);
    p[y] -= 1.0;
    return p;
  });
}

std::vector<double> MlpClassifierView::logits(std::span<const double> x) const {
  return model_->evaluate(x);
}

std::vector<double> MlpClassifierView::input_gradient(std::span<const double> x,
                                                      const LogitGradientFn& upstream,
                                                      std::vector<double>* logits_out) const {
  ForwardTrace t = model_->trace(x);
  std::vector<double> dz = upstream(t.output());
  if (logits_out) logits_out->assign(t.output().begin(), t.output().end());
  return model_->backward(t, dz, /*parameter_grads=*/false).input_grad;
}

}  // namespace advmal
