#include "din/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace din {

std::string_view to_string(ClipMode mode) {
  switch (mode) {
    case ClipMode::none:
      return "none";
    case ClipMode::symmetric:
      return "symmetric";
    case ClipMode::monotone:
      return "monotone";
  }
  return "none";
}

ClipMode parse_clip_mode(std::string_view name) {
  if (name == "none") return ClipMode::none;
  if (name == "symmetric") return ClipMode::symmetric;
  if (name == "monotone") return ClipMode::monotone;
  throw ConfigError("unknown clipping mode '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("ADAM betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("ADAM epsilon must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (steps < 0) throw ConfigError("step count must be non-negative");
  if (kappa < 0.0) throw ConfigError("kappa must be non-negative");
  if (epsilon && *epsilon > 0.0) throw ConfigError("soft-monotonicity epsilon must be <= 0");
  if (schedule) {
    if (!(schedule->factor > 0.0)) throw ConfigError("step-decay factor must be positive");
    if (schedule->every < 1) throw ConfigError("step-decay interval must be at least 1");
  }
}

std::pair<double, std::vector<float>> mae_loss(std::span<const float> pred, std::span<const float> target) {
  if (pred.empty()) throw ArgumentError("MAE of an empty vector");
  if (pred.size() != target.size()) throw ArgumentError("MAE operands differ in length");
  const double n = static_cast<double>(pred.size());
  std::vector<float> grad(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    sum += std::abs(diff);
    grad[i] = static_cast<float>(diff > 0.0 ? 1.0 / n : diff < 0.0 ? -1.0 / n : 0.0);
  }
  return {sum / n, std::move(grad)};
}

AdamState::AdamState(const std::vector<std::size_t>& sizes) {
  for (std::size_t n : sizes) {
    first_.emplace_back(n, 0.0f);
    second_.emplace_back(n, 0.0f);
  }
}

void adam_step(std::span<const std::span<float>> params, std::span<const std::span<const float>> grads,
               AdamState& state, const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != state.first_.size()) {
    throw ConfigError("ADAM: parameter, gradient and state block counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.first_[b].size()) {
      throw ConfigError("ADAM: block " + std::to_string(b) + " shape mismatch");
    }
  }
  const double lr = lr_schedule(state.step_, config);
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const float b1 = static_cast<float>(config.beta1);
  const float b2 = static_cast<float>(config.beta2);
  const float bc1 = static_cast<float>(1.0 - std::pow(config.beta1, t));
  const float bc2 = static_cast<float>(1.0 - std::pow(config.beta2, t));
  const float eps = static_cast<float>(config.adam_eps);
  const float rate = static_cast<float>(lr);
  const float tiny = std::numeric_limits<float>::min();
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    auto g = grads[b];
    auto& m = state.first_[b];
    auto& v = state.second_[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const float gi = g[i];
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
      // Moments of cells that stop receiving gradient decay into the
      // subnormal range, where arithmetic is very slow. Flush them.
      if (std::abs(m[i]) < tiny) m[i] = 0.0f;
      if (v[i] < tiny) v[i] = 0.0f;
      const float mhat = m[i] / bc1;
      const float vhat = v[i] / bc2;
      p[i] -= rate * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double lr_schedule(std::int64_t step, const TrainConfig& config) {
  if (!config.schedule) return config.learning_rate;
  const auto k = static_cast<double>(step / config.schedule->every);
  return config.learning_rate * std::pow(config.schedule->factor, k);
}

void clip_symmetric(std::span<float> grad, int resolution, double lr) {
  if (resolution < 1 || !(lr > 0.0)) throw ArgumentError("clip_symmetric needs a positive resolution and rate");
  const float bound = static_cast<float>(1.0 / (2.0 * resolution * lr));
  for (auto& g : grad) g = std::clamp(g, -bound, bound);
}

void clip_monotone(std::span<float> grad, const Grid<float>& array, double lr) {
  if (array.dims() != 1 || array.channels() != 1) {
    throw PreconditionError("monotone clipping applies to 1-D single-channel arrays");
  }
  if (grad.size() != array.size()) throw ArgumentError("gradient buffer shape mismatch");
  if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
  auto c = array.cells();
  const std::size_t n = c.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!(c[i + 1] > c[i])) {
      throw PreconditionError("array is not strictly monotone at cell " + std::to_string(i));
    }
  }
  constexpr double kMargin = 0.999;
  grad[0] = 0.0f;
  grad[n - 1] = 0.0f;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    // Step is -lr g: it must not reach halfway to the next cell (g < 0 moves
    // up) nor halfway to the previous one (g > 0 moves down).
    const double lo = -(static_cast<double>(c[i + 1]) - c[i]) / (2.0 * lr) * kMargin;
    const double hi = (static_cast<double>(c[i]) - c[i - 1]) / (2.0 * lr) * kMargin;
    grad[i] = static_cast<float>(std::clamp(static_cast<double>(grad[i]), lo, hi));
  }
  // The bounds hold in exact arithmetic. Once a gap nears float spacing the
  // rounded update can still tie, so freeze any pair that would.
  const float step = static_cast<float>(lr);
  for (bool again = true; again;) {
    again = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (c[i] - step * grad[i] < c[i + 1] - step * grad[i + 1]) continue;
      grad[i] = 0.0f;
      grad[i + 1] = 0.0f;
      again = true;
    }
  }
}

}  // namespace din
