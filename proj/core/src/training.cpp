#include "advmal/training.hpp"

#include <algorithm>
#include <stdexcept>

#include "advmal/classifier.hpp"

namespace advmal {

std::vector<std::size_t> epoch_order(Rng& rng, std::size_t n) {
  return random_permutation(rng, n);
}

TrainTrace train_supervised(Mlp& model, const Dataset& data, const TrainOptions& options) {
  if (data.empty()) throw std::invalid_argument("train_supervised: empty dataset");
  if (options.batch_size == 0) throw std::invalid_argument("train_supervised: batch_size is 0");
  if (data.dim != model.input_dim())
    throw ShapeError("dataset dimension does not match the network input");

  TrainTrace trace;
  Rng rng(options.seed);
  AdamState adam(model.parameter_count(), options.learning_rate);
  std::vector<double> params = model.flatten_params();

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const std::vector<std::size_t> order = epoch_order(rng, data.size());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::vector<double> grad(params.size(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        ForwardTrace t = model.trace(data.examples[i]);
        std::vector<double> upstream = softmax(t.output());
        batch_loss += cross_entropy(upstream, data.labels[i]);
        upstream[static_cast<std::size_t>(data.labels[i])] -= 1.0;
        const std::vector<double> g = model.backward(t, upstream).flatten_params();
        for (std::size_t p = 0; p < g.size(); ++p) grad[p] += scale * g[p];
      }
      adam_step(adam, params, grad, Direction::kMinimize);
      model.assign_params(params);
      loss_sum += batch_loss * scale;
      ++batches;
    }
    trace.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  return trace;
}

double training_accuracy(const Mlp& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (static_cast<int>(argmax(model.evaluate(data.examples[i]))) == data.labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace advmal
