#include "din/task_ggx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "din/error.hpp"

namespace din {

namespace {

constexpr double kAlphaFloor = 1e-3;
constexpr std::int64_t kDefaultSteps = 20000;
constexpr double kMaxWeight = 16.0;

}  // namespace

double ggx_reference(double h_z, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("GGX roughness must lie in (0, 1]");
  if (!(h_z >= 0.0 && h_z <= 1.0)) throw ArgumentError("GGX h_z must lie in [0, 1]");
  const double a4 = alpha * alpha * alpha * alpha;
  const double denom = 1.0 + (a4 - 1.0) * h_z * h_z;
  return a4 / (std::numbers::pi * denom * denom);
}

std::vector<GgxSample> sample_ggx_inputs(Rng& rng, std::size_t count) {
  std::vector<GgxSample> out(count);
  for (auto& s : out) {
    s.h_z = std::sqrt(uniform01(rng));
    const double u = uniform01(rng);
    s.alpha = std::clamp(u * u, kAlphaFloor, 1.0);
    s.d = ggx_reference(s.h_z, s.alpha);
  }
  return out;
}

DInNetwork make_ggx_network(int primary_resolution, int cascaded_resolution) {
  GridArray primary({primary_resolution, primary_resolution}, 2, Nonlinearity::triangle());
  init_identity_ramp(primary);
  GridArray cascaded({cascaded_resolution, cascaded_resolution}, 1);
  cascaded.fill(0.5f);
  return DInNetwork::chain(std::move(primary), std::move(cascaded));
}

double ggx_network(const DInNetwork& net, double h_z, double alpha) {
  const float in[2] = {static_cast<float>(alpha), static_cast<float>(h_z)};
  return std::max(0.0, static_cast<double>(net.forward(in)[0]));
}

double ggx_normalizer(std::span<const GgxSample> samples) {
  if (samples.empty()) throw ArgumentError("empty GGX sample set");
  std::vector<double> d;
  d.reserve(samples.size());
  for (const auto& s : samples) d.push_back(s.d);
  const std::size_t k = static_cast<std::size_t>(0.99 * static_cast<double>(d.size() - 1));
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  return d[k];
}

double ggx_psnr(const DInNetwork& net, std::span<const GgxSample> samples, double scale) {
  if (samples.empty()) throw ArgumentError("empty GGX sample set");
  if (!(scale > 0.0)) throw ArgumentError("GGX normalizer must be positive");
  auto pass = net.make_pass();
  double sum = 0.0;
  for (const auto& s : samples) {
    const float in[2] = {static_cast<float>(s.alpha), static_cast<float>(s.h_z)};
    net.forward(in, pass);
    const double got = std::clamp(static_cast<double>(pass.output[0]) / scale, 0.0, 1.0);
    const double want = std::clamp(s.d / scale, 0.0, 1.0);
    sum += (got - want) * (got - want);
  }
  const double m = sum / static_cast<double>(samples.size());
  return m == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / m);
}

GgxModel train_ggx(const GgxTaskConfig& config) {
  GgxModel model;
  model.net = make_ggx_network(config.primary_resolution, config.cascaded_resolution);

  Rng calib_rng(derive_seed(config.train.seed, 0x66a1));
  const auto holdout = sample_ggx_inputs(calib_rng, config.holdout);
  model.target_scale = ggx_normalizer(holdout);
  const double inv_scale = 1.0 / model.target_scale;
  const double cap = config.target_cap.value_or(std::numeric_limits<double>::infinity());

  TrainOptions options;
  options.config = config.train;
  if (options.config.steps == 0) options.config.steps = kDefaultSteps;
  Rng rng(derive_seed(config.train.seed, 0x66a2));
  const std::size_t batch_size = config.train.batch_size;
  auto source = [&](std::int64_t, SampleBatch& batch) {
    batch.resize(batch_size);
    if (config.density_weighting) batch.weights.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const auto s = sample_ggx_inputs(rng, 1)[0];
      auto in = batch.input(i);
      in[0] = static_cast<float>(s.alpha);
      in[1] = static_cast<float>(s.h_z);
      batch.target(i)[0] = static_cast<float>(std::min(s.d * inv_scale, cap));
      // pdf(h_z) = 2 h_z, pdf(alpha) = 1 / (2 sqrt(alpha))
      if (config.density_weighting) {
        batch.weights[i] = static_cast<float>(std::min(kMaxWeight, std::sqrt(s.alpha) / std::max(s.h_z, 1e-6)));
      }
    }
  };

  // Checkpoint PSNR is measured on a rescaled copy so training is untouched.
  auto measure = [&](std::int64_t step) {
    DInNetwork copy = model.net;
    for (auto& c : copy.cascaded().cells()) c = static_cast<float>(c * model.target_scale);
    model.checkpoints.push_back({step, ggx_psnr(copy, holdout, model.target_scale)});
  };
  std::vector<std::int64_t> marks = config.checkpoints;
  std::sort(marks.begin(), marks.end());
  std::size_t next_mark = 0;
  options.on_step = [&](std::int64_t step, double) {
    while (next_mark < marks.size() && marks[next_mark] == step + 1) {
      measure(step + 1);
      ++next_mark;
    }
  };
  model.report = train_network(model.net, source, options);
  for (auto& c : model.net.cascaded().cells()) c = static_cast<float>(c * model.target_scale);
  return model;
}

void write_ggx_grid_csv(const DInNetwork& net, int n, const std::filesystem::path& path) {
  if (n < 2) throw ArgumentError("GGX grid needs at least 2 points per axis");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(9);
  out << "h_z,alpha,d_ref,d_net\n";
  for (int j = 0; j < n; ++j) {
    const double alpha = std::max(kAlphaFloor, static_cast<double>(j) / (n - 1));
    for (int i = 0; i < n; ++i) {
      const double h_z = static_cast<double>(i) / (n - 1);
      out << h_z << ',' << alpha << ',' << ggx_reference(h_z, alpha) << ',' << ggx_network(net, h_z, alpha) << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace din
