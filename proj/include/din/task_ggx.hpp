#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "din/network.hpp"
#include "din/random.hpp"
#include "din/trainer.hpp"

namespace din {

/// D = a^4 / (pi (1 + (a^4 - 1) h_z^2)^2).
double ggx_reference(double h_z, double alpha);

struct GgxSample {
  double h_z = 0.0;
  double alpha = 0.0;
  double d = 0.0;
};

/// h_z = sqrt(u) (cosine hemisphere), alpha = clamp(u'^2, 1e-3, 1).
std::vector<GgxSample> sample_ggx_inputs(Rng& rng, std::size_t count);

struct GgxTaskConfig {
  int primary_resolution = 16;
  int cascaded_resolution = 8;
  TrainConfig train;  // steps defaults to 20000 when 0
  /// Checkpoints (step counts) at which held-out PSNR is recorded.
  std::vector<std::int64_t> checkpoints;
  std::size_t holdout = 100000;
  /// Weights each sample by its inverse sampling density (capped).
  bool density_weighting = false;
  /// Training targets are clamped to target_cap * target_scale when set.
  std::optional<double> target_cap;
};

struct GgxCheckpoint {
  std::int64_t step = 0;
  double psnr = 0.0;
};

struct GgxModel {
  DInNetwork net;
  TrainReport report;
  /// Training targets are D / target_scale; the cascaded array is rescaled
  /// afterwards so the network outputs D directly.
  double target_scale = 1.0;
  std::vector<GgxCheckpoint> checkpoints;
};

/// 2D primary (triangle, uv ramp) queried at (alpha, h_z) into a 2D
/// single-channel cascaded array without nonlinearity, initialised to 0.5.
DInNetwork make_ggx_network(int primary_resolution, int cascaded_resolution);

GgxModel train_ggx(const GgxTaskConfig& config);

/// Network output clamped at 0.
double ggx_network(const DInNetwork& net, double h_z, double alpha);

/// 99th percentile of D over the set.
double ggx_normalizer(std::span<const GgxSample> samples);

/// PSNR after dividing both sides by `scale` and clamping to [0, 1].
double ggx_psnr(const DInNetwork& net, std::span<const GgxSample> samples, double scale);

/// Evaluation grid of (h_z, alpha, D_ref, D_net) rows, `n` x `n` points.
void write_ggx_grid_csv(const DInNetwork& net, int n, const std::filesystem::path& path);

}  // namespace din
