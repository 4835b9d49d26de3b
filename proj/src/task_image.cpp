#include "din/task_image.hpp"

#include <algorithm>
#include <cmath>

#include "din/random.hpp"

namespace din {

double default_image_rho(int base_resolution, double compression) {
  if (base_resolution >= 4096) {
    // tuned ratios for 4K RGB at 3x / 6x / 12x / 24x
    if (compression <= 9.0) return 128.0;
    if (compression <= 18.0) return 80.0;
    return 72.0;
  }
  if (base_resolution >= 1024) return 64.0;
  // Small images: N_c moves in coarse steps, so a single ratio would map
  // several compression targets onto the same layout.
  if (compression <= 9.0) return 22.0;
  if (compression <= 18.0) return 15.0;
  return 9.0;
}

DInNetwork make_image_network(const Layout& layout, std::span<const ChannelRole> roles) {
  const int d = layout.cascaded_dims;
  if (static_cast<int>(roles.size()) != layout.channels) throw ConfigError("one channel role per image channel");
  GridArray primary({layout.primary_resolution, layout.primary_resolution}, d, Nonlinearity::triangle());
  init_identity_ramp(primary);
  GridArray cascaded(std::vector<int>(static_cast<std::size_t>(d), layout.cascaded_resolution), layout.channels);
  const auto init = channel_init_values(roles);
  for (int c = 0; c < layout.channels; ++c) cascaded.fill_channel(c, init[c]);
  return DInNetwork::chain(std::move(primary), std::move(cascaded));
}

ImageModel train_image(const ImageBuffer& img, const ImageTaskConfig& config) {
  if (!(config.compression > 1.0)) throw ConfigError("image compression ratio must exceed 1");
  const int base = std::max(img.width, img.height);
  const double rho = config.rho.value_or(default_image_rho(base, config.compression));
  ImageModel model;
  model.layout = solve_layout_image(img.width, img.height, img.channels, config.compression, rho, config.cascaded_dims);
  const auto roles = config.roles.empty() ? default_channel_roles(img.channels) : config.roles;
  model.net = make_image_network(model.layout, roles);

  TrainOptions options;
  options.config = config.train;
  if (options.config.steps == 0) {
    const std::size_t samples = img.pixel_count() * static_cast<std::size_t>(config.epochs);
    options.config.steps = static_cast<std::int64_t>((samples + config.train.batch_size - 1) / config.train.batch_size);
  }
  Rng rng(derive_seed(config.train.seed, 0x1a6e));
  StratifiedSampler strata(img.width, img.height);
  const std::size_t batch_size = config.train.batch_size;
  std::vector<float> uv(2 * batch_size);
  auto source = [&](std::int64_t, SampleBatch& batch) {
    batch.resize(batch_size);
    strata.draw(batch_size, rng, uv);
    for (std::size_t i = 0; i < batch_size; ++i) {
      auto in = batch.input(i);
      in[0] = uv[2 * i];
      in[1] = uv[2 * i + 1];
      bilinear_sample(img, in[0], in[1], batch.target(i));
    }
  };
  model.report = train_network(model.net, source, options);
  return model;
}

ImageBuffer decode_image(const DInNetwork& net, int width, int height) {
  if (net.input_dims() != 2) throw ConfigError("image decoding needs a network with 2 input components");
  ImageBuffer out(width, height, net.output_channels());
  auto pass = net.make_pass();
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const float in[2] = {static_cast<float>(texel_coordinate(x, width)),
                           static_cast<float>(texel_coordinate(y, height))};
      net.forward(in, pass);
      for (int c = 0; c < out.channels; ++c) out.at(x, y, c) = std::clamp(pass.output[c], 0.0f, 1.0f);
    }
  }
  return out;
}

ImageBuffer downsample_baseline(const ImageBuffer& img, double compression) {
  const double side = std::sqrt(compression);
  const int w = std::max(1, static_cast<int>(std::lround(img.width / side)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height / side)));
  return resize_bilinear(resize_bilinear(img, w, h), img.width, img.height);
}

}  // namespace din
