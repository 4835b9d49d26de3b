#include "din/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "din/parallel.hpp"

#if defined(__SSE2__) || defined(_M_X64)
#include <immintrin.h>
#define DIN_HAVE_MXCSR 1
#endif

namespace din {

namespace {

// Flush-to-zero and denormals-are-zero for the current thread while in
// scope. Sparse updates leave many values decaying toward zero, and
// subnormal arithmetic slows training several times over.
class DenormalGuard {
 public:
#ifdef DIN_HAVE_MXCSR
  DenormalGuard() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~DenormalGuard() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

constexpr double kMapeFloor = 1e-6;

struct Shard {
  NetworkPass<float> pass;
  std::vector<GradBuffer<float>> grads;
  std::vector<float> upstream;
  double loss = 0.0;
};

// Accumulates gradients for samples [begin, end) into `shard`; returns the
// unnormalized loss sum. `scale` is 1 / (samples * channels).
double accumulate(const DInNetwork& net, const SampleBatch& batch, std::size_t begin, std::size_t end, LossKind loss,
                  float scale, Shard& shard, bool with_grad) {
  const int nc = net.output_channels();
  const bool weighted = !batch.weights.empty();
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    std::span<const float> in(batch.inputs.data() + i * batch.input_dims, batch.input_dims);
    const float* target = batch.targets.data() + i * batch.target_dims;
    net.forward(in, shard.pass);
    const float w = weighted ? batch.weights[i] : 1.0f;
    bool any = false;
    for (int c = 0; c < nc; ++c) {
      const float diff = shard.pass.output[c] - target[c];
      float denom = 1.0f;
      if (loss == LossKind::mape) denom = static_cast<float>(std::max<double>(std::abs(target[c]), kMapeFloor));
      sum += static_cast<double>(w) * std::abs(diff) / denom;
      const float g = diff > 0.0f ? 1.0f : diff < 0.0f ? -1.0f : 0.0f;
      shard.upstream[c] = g * w * scale / denom;
      any = any || shard.upstream[c] != 0.0f;
    }
    if (with_grad && any) net.backward(shard.pass, shard.upstream, shard.grads);
  }
  return sum;
}

}  // namespace

std::string_view to_string(LossKind kind) { return kind == LossKind::mape ? "mape" : "mae"; }

TrainReport train_network(DInNetwork& net, const BatchSource& next_batch, const TrainOptions& options) {
  const auto& config = options.config;
  config.validate();
  const DenormalGuard denormals;
  const std::size_t arrays = net.array_count();
  std::vector<bool> trainable = options.trainable;
  if (trainable.empty()) {
    for (std::size_t i = 0; i < arrays; ++i) trainable.push_back(!net.array(i).quantized());
  }
  if (trainable.size() != arrays) throw ConfigError("trainable mask must list every array");
  for (std::size_t i = 0; i < arrays; ++i) {
    if (trainable[i] && net.array(i).quantized()) throw ConfigError("quantized arrays cannot be trained");
  }
  if (config.clipping == ClipMode::monotone) {
    for (std::size_t p = 0; p < net.primaries().size(); ++p) {
      const auto& g = net.primary(p);
      if (trainable[p] && (g.dims() != 1 || g.channels() != 1)) {
        throw ConfigError("monotone clipping needs 1-D single-channel primaries");
      }
    }
  }

  // Monotone-clipped primaries take plain descent steps; the clip bounds are
  // only valid for c -= lr g, not for ADAM's rescaled update.
  std::vector<bool> plain(arrays, false);
  if (config.clipping == ClipMode::monotone) {
    for (std::size_t p = 0; p < net.primaries().size(); ++p) plain[p] = trainable[p];
  }
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < arrays; ++i) {
    if (trainable[i] && !plain[i]) sizes.push_back(net.array(i).size());
  }
  AdamState adam(sizes);

  const int workers = std::max(1, worker_count());
  std::vector<Shard> shards(static_cast<std::size_t>(workers));
  for (auto& s : shards) {
    s.pass = net.make_pass();
    s.grads = net.make_grad_buffers();
    s.upstream.resize(static_cast<std::size_t>(net.output_channels()));
  }

  SampleBatch batch(net.input_dims(), net.output_channels());
  TrainReport report;
  report.losses.reserve(static_cast<std::size_t>(config.steps));
  for (std::int64_t step = 0; step < config.steps; ++step) {
    next_batch(step, batch);
    const std::size_t n = batch.size();
    if (n == 0) throw ConfigError("batch source produced an empty batch");
    if (batch.input_dims != net.input_dims() || batch.target_dims != net.output_channels()) {
      throw ConfigError("batch shape does not match the network");
    }
    const float scale = 1.0f / static_cast<float>(n * static_cast<std::size_t>(net.output_channels()));

    run_workers(workers, [&](int w) {
      const DenormalGuard worker_denormals;
      auto& shard = shards[static_cast<std::size_t>(w)];
      for (auto& g : shard.grads) std::fill(g.begin(), g.end(), 0.0f);
      const auto slice = worker_slice(n, w, workers);
      shard.loss = accumulate(net, batch, slice.begin, slice.end, options.loss, scale, shard, true);
    });
    double loss = 0.0;
    for (auto& s : shards) loss += s.loss;
    loss /= static_cast<double>(n * static_cast<std::size_t>(net.output_channels()));
    auto& grads = shards[0].grads;
    for (std::size_t w = 1; w < shards.size(); ++w) {
      for (std::size_t a = 0; a < arrays; ++a) {
        auto& dst = grads[a];
        const auto& src = shards[w].grads[a];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
    }

    const double lr = lr_schedule(adam.step(), config);
    for (std::size_t p = 0; p < net.primaries().size(); ++p) {
      if (!trainable[p]) continue;
      const auto& g = net.primary(p);
      if (config.kappa > 0.0) loss += soft_monotonicity(g, config.kappa, config.epsilon, std::span<float>(grads[p]));
      if (config.clipping == ClipMode::symmetric) {
        clip_symmetric(grads[p], *std::max_element(g.shape().begin(), g.shape().end()), lr);
      } else if (config.clipping == ClipMode::monotone) {
        clip_monotone(grads[p], g, lr);
      }
    }

    std::vector<std::span<float>> params;
    std::vector<std::span<const float>> grad_views;
    for (std::size_t a = 0; a < arrays; ++a) {
      if (!trainable[a]) continue;
      if (plain[a]) {
        auto c = net.array(a).cells();
        const float step_size = static_cast<float>(lr);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] -= step_size * grads[a][i];
        continue;
      }
      params.push_back(net.array(a).cells());
      grad_views.push_back(grads[a]);
    }
    adam_step(params, grad_views, adam, config);

    report.losses.push_back(loss);
    if (options.on_step) options.on_step(step, loss);
  }
  report.steps = config.steps;
  return report;
}

double evaluate_loss(const DInNetwork& net, const SampleBatch& batch, LossKind loss) {
  if (batch.size() == 0) throw ArgumentError("cannot evaluate an empty batch");
  Shard shard;
  shard.pass = net.make_pass();
  shard.upstream.resize(static_cast<std::size_t>(net.output_channels()));
  const double sum = accumulate(net, batch, 0, batch.size(), loss, 1.0f, shard, false);
  return sum / static_cast<double>(batch.size() * static_cast<std::size_t>(net.output_channels()));
}

}  // namespace din
