#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "din/network.hpp"
#include "din/optim.hpp"

namespace din {

/// Flat minibatch of (input, target) pairs with optional per-sample weights.
struct SampleBatch {
  int input_dims = 0;
  int target_dims = 0;
  std::vector<float> inputs;   // size() x input_dims
  std::vector<float> targets;  // size() x target_dims
  std::vector<float> weights;  // empty, or one per sample

  SampleBatch() = default;
  SampleBatch(int in, int out) : input_dims(in), target_dims(out) {}

  std::size_t size() const { return input_dims == 0 ? 0 : inputs.size() / static_cast<std::size_t>(input_dims); }
  void resize(std::size_t n) {
    inputs.resize(n * static_cast<std::size_t>(input_dims));
    targets.resize(n * static_cast<std::size_t>(target_dims));
  }
  std::span<float> input(std::size_t i) { return std::span<float>(inputs).subspan(i * input_dims, input_dims); }
  std::span<float> target(std::size_t i) { return std::span<float>(targets).subspan(i * target_dims, target_dims); }
};

enum class LossKind {
  mae,   // mean |pred - target|
  mape,  // mean |pred - target| / max(|target|, 1e-6)
};

std::string_view to_string(LossKind kind);

/// Fills `batch` with the samples for optimizer step `step`.
using BatchSource = std::function<void(std::int64_t step, SampleBatch& batch)>;

struct TrainOptions {
  TrainConfig config;
  LossKind loss = LossKind::mae;
  /// Per array (network storage order); empty trains every non-quantized array.
  std::vector<bool> trainable;
  /// Called after each optimizer step with the batch loss of that step.
  std::function<void(std::int64_t step, double loss)> on_step;
};

struct TrainReport {
  std::vector<double> losses;  // per step, data term plus regularizer
  std::int64_t steps = 0;
};

/// Minibatch training of `net` in place. Each step: zero gradients,
/// evaluate the batch (sharded over worker_count() workers, one gradient
/// buffer per worker, reduced in worker order), add the soft-monotonicity
/// term when kappa > 0, clip per config, then one ADAM step. Under monotone
/// clipping the primaries take a plain descent step (c -= lr g) instead.
TrainReport train_network(DInNetwork& net, const BatchSource& next_batch, const TrainOptions& options);

/// Loss of the network on a batch without touching any gradients.
double evaluate_loss(const DInNetwork& net, const SampleBatch& batch, LossKind loss = LossKind::mae);

}  // namespace din
