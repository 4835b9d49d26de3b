#include "din/task_sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "din/error.hpp"

namespace din {

MipChain build_mip_chain(const ImageBuffer& img) {
  if (img.width != img.height) throw ArgumentError("mip chain needs a square image");
  if (img.width < 1 || !std::has_single_bit(static_cast<unsigned>(img.width))) {
    throw ArgumentError("mip chain needs a power-of-two side, got " + std::to_string(img.width));
  }
  MipChain chain;
  chain.levels.push_back(img);
  while (chain.levels.back().width > 1) chain.levels.push_back(box_downsample(chain.levels.back()));
  return chain;
}

double footprint_lod(const MipChain& chain, double footprint) {
  const double n = chain.base_resolution();
  const double lod = std::log2(std::max(footprint, 1.0 / n) * n);
  return std::clamp(lod, 0.0, static_cast<double>(chain.level_count() - 1));
}

void proxy_trilinear(const MipChain& chain, double u, double v, double footprint, std::span<float> out) {
  if (chain.levels.empty()) throw ArgumentError("empty mip chain");
  const double lod = footprint_lod(chain, footprint);
  const int lo = static_cast<int>(std::floor(lod));
  const int hi = std::min(lo + 1, chain.level_count() - 1);
  const double t = lod - lo;
  bilinear_sample(chain.levels[lo], u, v, out);
  if (t == 0.0 || hi == lo) return;
  std::vector<float> upper(out.size());
  bilinear_sample(chain.levels[hi], u, v, upper);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = static_cast<float>((1.0 - t) * out[c] + t * upper[c]);
  }
}

std::vector<float> proxy_trilinear(const MipChain& chain, double u, double v, double footprint) {
  std::vector<float> out(static_cast<std::size_t>(chain.channels()));
  proxy_trilinear(chain, u, v, footprint, out);
  return out;
}

double lod_exponent(int base_resolution, double p) {
  if (base_resolution < 2) throw ArgumentError("base resolution must be at least 2");
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("p must lie in (0, 1)");
  return -std::log(static_cast<double>(base_resolution)) / std::log(p);
}

double lod_lambda(double p, double t) {
  if (!(p > 0.0 && p < 1.0)) throw ArgumentError("p must lie in (0, 1)");
  if (!(t > 0.0)) throw ArgumentError("t must be positive");
  return -std::log(1.0 - p) / t;
}

double sample_footprint(const FootprintSampleConfig& config, Rng& rng) {
  const double u = uniform01(rng);
  if (!config.exponential) return std::pow(u, config.exponent());
  const double x = -std::log1p(-u) / config.lambda();
  return std::min(x, std::nextafter(1.0, 0.0));
}

std::vector<double> sample_footprints(const FootprintSampleConfig& config, Rng& rng, std::size_t count) {
  config.exponent();  // validates
  std::vector<double> out(count);
  for (auto& f : out) f = sample_footprint(config, rng);
  return out;
}

double footprint_from_derivatives(double dudx, double dvdx, double dudy, double dvdy) {
  return std::abs(dudx * dvdy - dvdx * dudy);
}

DInNetwork make_sampler_network(const Layout& layout, std::span<const ChannelRole> roles) {
  if (static_cast<int>(roles.size()) != layout.channels) throw ConfigError("one channel role per image channel");
  std::vector<GridArray> primaries;
  primaries.emplace_back(std::vector<int>{layout.primary_resolution, layout.primary_resolution}, 3,
                         Nonlinearity::triangle());
  primaries.emplace_back(std::vector<int>{layout.footprint_resolution}, 1, Nonlinearity::triangle());
  for (auto& p : primaries) init_identity_ramp(p);
  const int nc = layout.cascaded_resolution;
  GridArray cascaded({layout.lod_resolution, nc, nc, nc}, layout.channels);
  const auto init = channel_init_values(roles);
  for (int c = 0; c < layout.channels; ++c) cascaded.fill_channel(c, init[c]);
  std::vector<Wire> wiring = {{1, 0}, {0, 0}, {0, 1}, {0, 2}};
  return DInNetwork(std::move(primaries), std::move(cascaded), std::move(wiring));
}

SamplerModel train_sampler(const ImageBuffer& img, const SamplerTaskConfig& config) {
  const MipChain chain = build_mip_chain(img);
  SamplerModel model;
  model.layout = solve_layout_sampler(img.width, img.channels, config.compression, config.rho);
  const auto roles = config.roles.empty() ? default_channel_roles(img.channels) : config.roles;
  model.net = make_sampler_network(model.layout, roles);

  TrainOptions options;
  options.config = config.train;
  if (options.config.steps == 0) {
    const std::size_t samples = img.pixel_count() * static_cast<std::size_t>(config.epochs);
    options.config.steps = static_cast<std::int64_t>((samples + config.train.batch_size - 1) / config.train.batch_size);
  }
  FootprintSampleConfig fp{img.width, config.p, config.exponential_footprints};
  Rng uv_rng(derive_seed(config.train.seed, 0x5a3b));
  Rng fp_rng(derive_seed(config.train.seed, 0x5a3c));
  StratifiedSampler strata(img.width, img.height);
  const std::size_t batch_size = config.train.batch_size;
  std::vector<float> uv(2 * batch_size);
  auto source = [&](std::int64_t, SampleBatch& batch) {
    batch.resize(batch_size);
    strata.draw(batch_size, uv_rng, uv);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const double f = sample_footprint(fp, fp_rng);
      auto in = batch.input(i);
      in[0] = uv[2 * i];
      in[1] = uv[2 * i + 1];
      in[2] = config.ignore_footprint ? 0.0f : static_cast<float>(f);
      proxy_trilinear(chain, in[0], in[1], f, batch.target(i));
    }
  };
  model.report = train_network(model.net, source, options);
  return model;
}

ImageBuffer decode_sampler(const DInNetwork& net, int resolution, double footprint) {
  if (net.input_dims() != 3) throw ConfigError("sampler decoding needs a network with 3 input components");
  ImageBuffer out(resolution, resolution, net.output_channels());
  auto pass = net.make_pass();
  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const float in[3] = {static_cast<float>(texel_coordinate(x, resolution)),
                           static_cast<float>(texel_coordinate(y, resolution)), static_cast<float>(footprint)};
      net.forward(in, pass);
      for (int c = 0; c < out.channels; ++c) out.at(x, y, c) = std::clamp(pass.output[c], 0.0f, 1.0f);
    }
  }
  return out;
}

ImageBuffer proxy_image(const MipChain& chain, double footprint) {
  const int n = chain.base_resolution();
  ImageBuffer out(n, n, chain.channels());
  std::vector<float> px(static_cast<std::size_t>(chain.channels()));
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      proxy_trilinear(chain, texel_coordinate(x, n), texel_coordinate(y, n), footprint, px);
      for (int c = 0; c < out.channels; ++c) out.at(x, y, c) = px[c];
    }
  }
  return out;
}

std::vector<FootprintPsnr> sampler_psnr_table(const DInNetwork& net, const MipChain& chain,
                                              std::span<const double> footprints, bool ignore_footprint) {
  std::vector<FootprintPsnr> rows;
  for (double f : footprints) {
    const ImageBuffer ref = proxy_image(chain, f);
    const ImageBuffer got = decode_sampler(net, chain.base_resolution(), ignore_footprint ? 0.0 : f);
    rows.push_back({f, psnr(ref, got)});
  }
  return rows;
}

void write_psnr_csv(std::span<const FootprintPsnr> rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "footprint,psnr_db\n";
  for (const auto& r : rows) out << r.footprint << ',' << r.psnr << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace din
