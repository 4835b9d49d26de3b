#pragma once

#include <optional>
#include <span>
#include <vector>

#include "din/image.hpp"
#include "din/layout.hpp"
#include "din/network.hpp"
#include "din/trainer.hpp"

namespace din {

struct ImageTaskConfig {
  double compression = 6.0;
  std::optional<double> rho;  // default_image_rho when unset
  int cascaded_dims = 4;
  int epochs = 40;            // used when train.steps == 0
  TrainConfig train;
  std::vector<ChannelRole> roles;  // empty: default_channel_roles(k)
};

/// Resolution ratio for a base resolution and compression ratio: the tuned
/// 4K RGB values for 4K and up, 64 for 1K-2K, and smaller per-ratio
/// values below 1K where 4-D cascaded arrays would otherwise swallow the budget.
double default_image_rho(int base_resolution, double compression);

/// 2D primary (cascaded_dims channels, triangle wave, identity ramp) into a
/// cascaded_dims-D cascaded array (no nonlinearity) initialised per channel role.
DInNetwork make_image_network(const Layout& layout, std::span<const ChannelRole> roles);

struct ImageModel {
  DInNetwork net;
  Layout layout;
  TrainReport report;
};

/// Trains on stratified jittered uv samples (one stratum per texel) against
/// bilinear targets with an MAE loss.
ImageModel train_image(const ImageBuffer& img, const ImageTaskConfig& config);

/// Evaluates the network at every texel center; output clamped to [0, 1].
ImageBuffer decode_image(const DInNetwork& net, int width, int height);

/// Same-size baseline: bilinear downsample by sqrt(e) per side, then back up.
ImageBuffer downsample_baseline(const ImageBuffer& img, double compression);

}  // namespace din
