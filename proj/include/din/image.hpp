#pragma once

#include <filesystem>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "din/random.hpp"

namespace din {

/// Row-major (y, x, channel) image with values in [0, 1].
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c, float fill = 0.0f);

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  float& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  std::span<const float> pixel(int x, int y) const {
    return std::span<const float>(data).subspan((static_cast<std::size_t>(y) * width + x) * channels, channels);
  }
};

/// Shading role of an image channel; decides the cascaded initial value.
enum class ChannelRole { albedo, ambient_occlusion, normal, roughness, other };

std::string_view to_string(ChannelRole role);
ChannelRole parse_channel_role(std::string_view name);

/// Default roles for k channels: RGB albedo first, then normal, AO, roughness.
std::vector<ChannelRole> default_channel_roles(int k);

/// Initial cascaded value for a channel: albedo 0.5, AO 1, normal
/// (0.5, 0.5, 1) by component, roughness 0.5, anything else 0.
std::vector<float> channel_init_values(std::span<const ChannelRole> roles);

/// Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), maxval 255.
ImageBuffer read_pnm(const std::filesystem::path& path);
void write_pnm(const ImageBuffer& img, const std::filesystem::path& path);

/// Multi-channel stack described by a JSON manifest:
///   {"width": W, "height": H, "layers": [{"path": "albedo.ppm", "role": "albedo"}, ...]}
/// Layer paths are relative to the manifest; a layer's role applies to each of its channels.
struct ImageStack {
  ImageBuffer image;
  std::vector<ChannelRole> roles;
};
ImageStack read_image_stack(const std::filesystem::path& manifest);

/// Reads a .ppm/.pgm directly or a .json stack manifest.
ImageStack read_image_any(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image as PNM, or any other channel count as a
/// stack of 3/1-channel layers plus `<stem>.json`.
void write_image_any(const ImageBuffer& img, std::span<const ChannelRole> roles, const std::filesystem::path& path);

/// Texel i of an n-texel axis sits at i / (n - 1) (0.5 when n == 1).
double texel_coordinate(int i, int n);

/// Vertex-centered bilinear interpolation; uv is clamped to [0, 1]^2.
void bilinear_sample(const ImageBuffer& img, double u, double v, std::span<float> out);
std::vector<float> bilinear_sample(const ImageBuffer& img, double u, double v);

ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height);

/// 2x2 box filter; odd trailing rows/columns are not allowed.
ImageBuffer box_downsample(const ImageBuffer& img);

double mse(const ImageBuffer& a, const ImageBuffer& b);

/// 10 log10(1 / MSE) over all channels jointly; +infinity when MSE is 0.
double psnr(const ImageBuffer& a, const ImageBuffer& b);
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// One jittered uv per texel stratum [x/W, (x+1)/W) x [y/H, (y+1)/H), in
/// row-major stratum order. Returns 2 W H floats.
std::vector<float> stratified_uv_batch(int width, int height, Rng& rng);

/// Jittered sample inside stratum (x, y).
void stratum_sample(int x, int y, int width, int height, Rng& rng, float& u, float& v);

/// Endless stratified stream: each epoch visits every stratum once in a
/// freshly shuffled order.
class StratifiedSampler {
 public:
  StratifiedSampler(int width, int height);

  /// Writes `count` uv pairs into uv (2 count floats).
  void draw(std::size_t count, Rng& rng, std::span<float> uv);

  std::size_t strata() const { return order_.size(); }

 private:
  int width_;
  int height_;
  std::vector<std::uint32_t> order_;
  std::size_t cursor_;
};

}  // namespace din
