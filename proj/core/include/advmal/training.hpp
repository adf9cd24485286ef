#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "advmal/datamodel.hpp"
#include "advmal/numerics.hpp"
#include "advmal/random.hpp"

namespace advmal {

struct TrainOptions {
  std::size_t epochs = 150;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;  // drives the per-epoch shuffles only
};

struct TrainTrace {
  /// Mean cross-entropy over the mini-batches of each epoch.
  std::vector<double> epoch_loss;
};

/// Order in which an epoch visits the examples: a fresh shuffle per epoch
/// drawn from `rng`. Shared by every trainer so that degenerate
/// configurations replay the same batches.
std::vector<std::size_t> epoch_order(Rng& rng, std::size_t n);

/// Mini-batch Adam on the mean cross-entropy. The last short batch is kept.
TrainTrace train_supervised(Mlp& model, const Dataset& data, const TrainOptions& options);

/// Fraction of examples whose argmax prediction equals the label.
double training_accuracy(const Mlp& model, const Dataset& data);

}  // namespace advmal
