#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "din/grid.hpp"

namespace din {

enum class ClipMode { none, symmetric, monotone };

std::string_view to_string(ClipMode mode);
ClipMode parse_clip_mode(std::string_view name);

struct StepDecay {
  double factor = 0.5;
  std::int64_t every = 1000;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 4096;
  std::int64_t steps = 0;  // 0: the task derives a count from its epoch setting
  std::uint64_t seed = 1;
  std::optional<StepDecay> schedule;
  ClipMode clipping = ClipMode::none;
  double kappa = 0.0;              // soft-monotonicity weight, >= 0
  std::optional<double> epsilon;   // soft-monotonicity slack, <= 0; default -1/N

  void validate() const;
};

/// Mean absolute error and its gradient sign(pred - target) / n.
std::pair<double, std::vector<float>> mae_loss(std::span<const float> pred, std::span<const float> target);

class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(const std::vector<std::size_t>& sizes);

  std::int64_t step() const { return step_; }
  std::size_t block_count() const { return first_.size(); }
  std::span<const float> first_moment(std::size_t i) const { return first_.at(i); }
  std::span<const float> second_moment(std::size_t i) const { return second_.at(i); }

 private:
  friend void adam_step(std::span<const std::span<float>>, std::span<const std::span<const float>>, AdamState&,
                        const TrainConfig&);
  std::vector<std::vector<float>> first_;
  std::vector<std::vector<float>> second_;
  std::int64_t step_ = 0;
};

/// Bias-corrected ADAM update of every parameter block in place, with the
/// learning rate taken from lr_schedule at the current step.
void adam_step(std::span<const std::span<float>> params, std::span<const std::span<const float>> grads,
               AdamState& state, const TrainConfig& config);

double lr_schedule(std::int64_t step, const TrainConfig& config);

/// Clamps every entry to +-1 / (2 N lr).
void clip_symmetric(std::span<float> grad, int resolution, double lr);

/// Per-cell bounds that keep a plain descent step (c -= lr g) strictly
/// monotone: the step may cover at most half the gap to either neighbour
/// (scaled by 0.999). Boundary cells are pinned (gradient zeroed). Pairs whose
/// float update c - float(lr) g would tie are frozen as well.
void clip_monotone(std::span<float> grad, const Grid<float>& array, double lr);

/// Soft monotonicity regularizer along each channel's ramp axis
/// (channel m increases along axis m mod d):
///   R = kappa / N * sum_i ReLU(eps + F(c[i]) - F(c[i+1]))
/// with c[N] padded by c[N-1]. The neighbour term F(c[i+1]) is treated as a
/// constant, so only c[i] receives gradient from term i. Returns R and adds
/// dR/dc into `grad`.
template <std::floating_point T>
double soft_monotonicity(const Grid<T>& array, double kappa, std::optional<double> eps, std::span<T> grad) {
  if (kappa < 0.0) throw ArgumentError("kappa must be non-negative");
  if (eps && *eps > 0.0) throw ArgumentError("soft-monotonicity epsilon must be <= 0");
  if (grad.size() != array.size()) throw ArgumentError("gradient buffer shape mismatch");
  if (kappa == 0.0) return 0.0;
  const auto& nl = array.nonlinearity();
  auto cells = array.cells();
  const int d = array.dims();
  const int nc = array.channels();
  double total = 0.0;
  std::vector<int> vertex(static_cast<std::size_t>(d), 0);
  for (int m = 0; m < nc; ++m) {
    const int axis = m % d;
    const int n = array.resolution(axis);
    const std::size_t stride = array.stride(axis);
    const double slack = eps ? *eps : -1.0 / n;
    const T weight = static_cast<T>(kappa / n);
    // Enumerate line starts: every vertex whose coordinate on `axis` is 0.
    std::fill(vertex.begin(), vertex.end(), 0);
    while (true) {
      const std::size_t start = array.index(vertex, m);
      for (int i = 0; i < n; ++i) {
        const std::size_t at = start + static_cast<std::size_t>(i) * stride;
        const std::size_t next = i + 1 < n ? at + stride : at;
        const T here = nl(cells[at]);
        const T there = nl(cells[next]);  // detached
        const double term = slack + static_cast<double>(here) - static_cast<double>(there);
        if (term > 0.0) {
          total += static_cast<double>(weight) * term;
          grad[at] += weight * nl.derivative(cells[at]);
        }
      }
      int j = d - 1;
      for (; j >= 0; --j) {
        if (j == axis) continue;
        if (++vertex[j] < array.resolution(j)) break;
        vertex[j] = 0;
      }
      if (j < 0) break;
    }
  }
  return total;
}

}  // namespace din
