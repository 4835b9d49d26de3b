#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "din/image.hpp"
#include "din/layout.hpp"
#include "din/network.hpp"
#include "din/random.hpp"
#include "din/trainer.hpp"

namespace din {

/// 2x2 box-filtered pyramid; level 0 is the square power-of-two base.
struct MipChain {
  std::vector<ImageBuffer> levels;

  int base_resolution() const { return levels.empty() ? 0 : levels.front().width; }
  int level_count() const { return static_cast<int>(levels.size()); }
  int channels() const { return levels.empty() ? 0 : levels.front().channels; }
};

MipChain build_mip_chain(const ImageBuffer& img);

/// Continuous level of detail for a footprint:
/// clamp(log2(max(f, 1/N) N), 0, L - 1).
double footprint_lod(const MipChain& chain, double footprint);

/// Bilinear samples at floor(lod) and ceil(lod), blended by frac(lod).
void proxy_trilinear(const MipChain& chain, double u, double v, double footprint, std::span<float> out);
std::vector<float> proxy_trilinear(const MipChain& chain, double u, double v, double footprint);

/// Power-law exponent n = -log(N_base) / log(p): a fraction p of u^n lies below 1/N_base.
double lod_exponent(int base_resolution, double p);

/// Rate of the exponential alternative, -ln(1 - p) / t.
double lod_lambda(double p, double t);

struct FootprintSampleConfig {
  int base_resolution = 1024;
  double p = 0.5;
  bool exponential = false;

  double t() const { return 1.0 / base_resolution; }
  double exponent() const { return lod_exponent(base_resolution, p); }
  double lambda() const { return lod_lambda(p, t()); }
};

/// Footprints x = u^n (or exponential with rate lambda, truncated below 1).
std::vector<double> sample_footprints(const FootprintSampleConfig& config, Rng& rng, std::size_t count);
double sample_footprint(const FootprintSampleConfig& config, Rng& rng);

/// Pixel footprint from screen-space uv derivatives: |ddx(uv) x ddy(uv)|.
double footprint_from_derivatives(double dudx, double dvdx, double dudy, double dvdy);

struct SamplerTaskConfig {
  double compression = 6.0;
  double rho = 64.0;
  double p = 0.5;
  bool exponential_footprints = false;
  int epochs = 40;  // used when train.steps == 0
  TrainConfig train;
  /// Footprint-ignorant ablation: the footprint input is held at 0.
  bool ignore_footprint = false;
  std::vector<ChannelRole> roles;
};

/// Primary 0: 2D, 3 channels (u, v, u ramp); primary 1: 1D footprint ramp
/// with N_p1 cells. Cascaded axis 0 is the footprint (N_lod vertices), axes
/// 1-3 take primary 0's channels.
DInNetwork make_sampler_network(const Layout& layout, std::span<const ChannelRole> roles);

struct SamplerModel {
  DInNetwork net;
  Layout layout;
  TrainReport report;
};

SamplerModel train_sampler(const ImageBuffer& img, const SamplerTaskConfig& config);

/// Dense evaluation at every base texel center at a fixed footprint.
ImageBuffer decode_sampler(const DInNetwork& net, int resolution, double footprint);

/// Proxy reference image at every base texel center.
ImageBuffer proxy_image(const MipChain& chain, double footprint);

struct FootprintPsnr {
  double footprint = 0.0;
  double psnr = 0.0;
};

/// PSNR of the network against the proxy sampler per footprint. With
/// `ignore_footprint` the network is queried at footprint 0.
std::vector<FootprintPsnr> sampler_psnr_table(const DInNetwork& net, const MipChain& chain,
                                              std::span<const double> footprints, bool ignore_footprint = false);

void write_psnr_csv(std::span<const FootprintPsnr> rows, const std::filesystem::path& path);

}  // namespace din
