#include "din/task_sdf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "din/error.hpp"
#include "din/parallel.hpp"

namespace din {

namespace {

double length(double x, double y, double z) { return std::sqrt(x * x + y * y + z * z); }

Vec3 normalized(Vec3 v) {
  const double l = length(v[0], v[1], v[2]);
  if (l == 0.0) return {0.0, 0.0, 1.0};
  return {v[0] / l, v[1] / l, v[2] / l};
}

double gaussian(Rng& rng) {
  // Box-Muller on uniform01 keeps the stream platform independent.
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec3 clamp_unit(Vec3 p) {
  for (auto& v : p) v = std::clamp(v, 0.0, 1.0);
  return p;
}

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace

std::string_view to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::box: return "box";
    case ShapeKind::torus: return "torus";
  }
  return "sphere";
}

ShapeKind parse_shape_kind(std::string_view name) {
  if (name == "sphere") return ShapeKind::sphere;
  if (name == "box") return ShapeKind::box;
  if (name == "torus") return ShapeKind::torus;
  throw ConfigError("unknown shape '" + std::string(name) + "' (expected sphere, box or torus)");
}

AnalyticSdf AnalyticSdf::sphere(Vec3 center, double radius) {
  if (!(radius > 0.0)) throw ArgumentError("sphere radius must be positive");
  return {ShapeKind::sphere, center, {radius, 0.0, 0.0}};
}

AnalyticSdf AnalyticSdf::box(Vec3 center, Vec3 half_extents) {
  for (double h : half_extents) {
    if (!(h > 0.0)) throw ArgumentError("box half extents must be positive");
  }
  return {ShapeKind::box, center, half_extents};
}

AnalyticSdf AnalyticSdf::torus(Vec3 center, double major, double minor) {
  if (!(minor > 0.0 && major > minor)) throw ArgumentError("torus needs 0 < r < R");
  return {ShapeKind::torus, center, {major, minor, 0.0}};
}

double sdf_reference(const AnalyticSdf& shape, const Vec3& pos) {
  const double x = pos[0] - shape.center[0];
  const double y = pos[1] - shape.center[1];
  const double z = pos[2] - shape.center[2];
  switch (shape.kind) {
    case ShapeKind::sphere:
      return length(x, y, z) - shape.size[0];
    case ShapeKind::box: {
      const double qx = std::abs(x) - shape.size[0];
      const double qy = std::abs(y) - shape.size[1];
      const double qz = std::abs(z) - shape.size[2];
      const double outside = length(std::max(qx, 0.0), std::max(qy, 0.0), std::max(qz, 0.0));
      return outside + std::min(std::max({qx, qy, qz}), 0.0);
    }
    case ShapeKind::torus: {
      const double ring = std::hypot(x, y) - shape.size[0];
      return std::hypot(ring, z) - shape.size[1];
    }
  }
  return 0.0;
}

SurfacePoint sample_surface(const AnalyticSdf& shape, Rng& rng) {
  const auto& c = shape.center;
  switch (shape.kind) {
    case ShapeKind::sphere: {
      const Vec3 n = normalized({gaussian(rng), gaussian(rng), gaussian(rng)});
      const double r = shape.size[0];
      return {{c[0] + r * n[0], c[1] + r * n[1], c[2] + r * n[2]}, n};
    }
    case ShapeKind::box: {
      const auto& h = shape.size;
      const double areas[3] = {h[1] * h[2], h[0] * h[2], h[0] * h[1]};
      const double pick = uniform01(rng) * (areas[0] + areas[1] + areas[2]);
      const int axis = pick < areas[0] ? 0 : pick < areas[0] + areas[1] ? 1 : 2;
      const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
      Vec3 p{};
      Vec3 n{0.0, 0.0, 0.0};
      for (int j = 0; j < 3; ++j) p[j] = c[j] + (2.0 * uniform01(rng) - 1.0) * h[j];
      p[axis] = c[axis] + side * h[axis];
      n[axis] = side;
      return {p, n};
    }
    case ShapeKind::torus: {
      const double big = shape.size[0];
      const double small = shape.size[1];
      const double theta = 2.0 * std::numbers::pi * uniform01(rng);
      double phi = 0.0;
      // Area element is proportional to R + r cos(phi).
      while (true) {
        phi = 2.0 * std::numbers::pi * uniform01(rng);
        if (uniform01(rng) * (big + small) <= big + small * std::cos(phi)) break;
      }
      const Vec3 n{std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi)};
      const double ring = big + small * std::cos(phi);
      return {{c[0] + ring * std::cos(theta), c[1] + ring * std::sin(theta), c[2] + small * std::sin(phi)}, n};
    }
  }
  return {};
}

SdfSampleSet sample_sdf_training_set(const AnalyticSdf& shape, const SdfSampleCounts& counts, double sigma, Rng& rng) {
  if (!(sigma > 0.0)) throw ArgumentError("near-surface sigma must be positive");
  SdfSampleSet set;
  set.near_count = counts.near;
  set.uniform_count = counts.uniform;
  const std::size_t total = counts.near + counts.uniform;
  set.positions.reserve(total);
  for (std::size_t i = 0; i < counts.near; ++i) {
    const auto s = sample_surface(shape, rng);
    const double t = sigma * gaussian(rng);
    set.positions.push_back(clamp_unit(
        {s.position[0] + t * s.normal[0], s.position[1] + t * s.normal[1], s.position[2] + t * s.normal[2]}));
  }
  for (std::size_t i = 0; i < counts.uniform; ++i) {
    set.positions.push_back({uniform01(rng), uniform01(rng), uniform01(rng)});
  }
  set.distances.resize(total);
  set.targets.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    set.distances[i] = sdf_reference(shape, set.positions[i]);
    set.targets[i] = tsdf_target(set.distances[i]);
  }
  return set;
}

NearestSampleIndex::NearestSampleIndex(std::span<const Vec3> points, int buckets_per_axis) : points_(points) {
  if (points.empty()) throw ArgumentError("nearest-sample index needs at least one point");
  if (points.size() > std::numeric_limits<std::uint32_t>::max()) throw ArgumentError("too many points");
  n_ = buckets_per_axis > 0 ? buckets_per_axis
                            : std::clamp(static_cast<int>(std::cbrt(static_cast<double>(points.size()) / 4.0)), 1, 128);
  const std::size_t cells = static_cast<std::size_t>(n_) * n_ * n_;
  auto cell_of = [&](const Vec3& p) {
    return (static_cast<std::size_t>(bucket_of(p[2])) * n_ + bucket_of(p[1])) * n_ + bucket_of(p[0]);
  };
  start_.assign(cells + 1, 0);
  for (const auto& p : points) ++start_[cell_of(p) + 1];
  for (std::size_t i = 0; i < cells; ++i) start_[i + 1] += start_[i];
  items_.resize(points.size());
  std::vector<std::uint32_t> fill(start_.begin(), start_.end() - 1);
  // Indices land in ascending order inside each bucket.
  for (std::size_t i = 0; i < points.size(); ++i) items_[fill[cell_of(points[i])]++] = static_cast<std::uint32_t>(i);
}

int NearestSampleIndex::bucket_of(double v) const {
  return std::clamp(static_cast<int>(std::floor(v * n_)), 0, n_ - 1);
}

std::size_t NearestSampleIndex::nearest(const Vec3& q) const {
  const int cx = bucket_of(q[0]);
  const int cy = bucket_of(q[1]);
  const int cz = bucket_of(q[2]);
  const double h = 1.0 / n_;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (int r = 0; r < n_; ++r) {
    // Points in ring r are at least (r - 1) h away.
    if (r >= 1 && std::isfinite(best)) {
      const double bound = (r - 1) * h;
      if (bound * bound > best) break;
    }
    for (int z = cz - r; z <= cz + r; ++z) {
      if (z < 0 || z >= n_) continue;
      for (int y = cy - r; y <= cy + r; ++y) {
        if (y < 0 || y >= n_) continue;
        const bool face = std::abs(z - cz) == r || std::abs(y - cy) == r;
        for (int x = cx - r; x <= cx + r; x += (face || r == 0) ? 1 : 2 * r) {
          if (x < 0 || x >= n_) continue;
          const std::size_t cell = (static_cast<std::size_t>(z) * n_ + y) * n_ + x;
          for (std::uint32_t k = start_[cell]; k < start_[cell + 1]; ++k) {
            const std::size_t i = items_[k];
            const double d = squared_distance(points_[i], q);
            if (d < best || (d == best && i < best_index)) {
              best = d;
              best_index = i;
            }
          }
        }
      }
    }
  }
  return best_index;
}

std::size_t nearest_sample_brute(std::span<const Vec3> points, const Vec3& q) {
  if (points.empty()) throw ArgumentError("nearest-sample lookup needs at least one point");
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = squared_distance(points[i], q);
    if (d < best) {
      best = d;
      best_index = i;
    }
  }
  return best_index;
}

void init_cascaded_from_samples(GridArray& cascaded, const SdfSampleSet& samples, bool brute_force) {
  if (samples.size() == 0) throw ArgumentError("cascaded initialisation needs at least one sample");
  if (cascaded.dims() != 3 || cascaded.channels() != 1) throw ArgumentError("SDF cascaded array must be 3D, 1 channel");
  std::optional<NearestSampleIndex> index;
  if (!brute_force) index.emplace(samples.positions);
  const int n0 = cascaded.resolution(0);
  const int n1 = cascaded.resolution(1);
  const int n2 = cascaded.resolution(2);
  const std::size_t count = cascaded.vertex_count();
  auto cells = cascaded.cells();
  const int workers = std::max(1, worker_count());
  run_workers(workers, [&](int w) {
    const auto slice = worker_slice(count, w, workers);
    for (std::size_t v = slice.begin; v < slice.end; ++v) {
      const int i2 = static_cast<int>(v % n2);
      const int i1 = static_cast<int>((v / n2) % n1);
      const int i0 = static_cast<int>(v / (static_cast<std::size_t>(n2) * n1));
      const Vec3 p{static_cast<double>(i0) / (n0 - 1), static_cast<double>(i1) / (n1 - 1),
                   static_cast<double>(i2) / (n2 - 1)};
      const std::size_t k = brute_force ? nearest_sample_brute(samples.positions, p) : index->nearest(p);
      cells[v] = samples.targets[k];
    }
  });
}

DInNetwork make_sdf_network(const Layout& layout) {
  const int np = layout.primary_resolution;
  const int nc = layout.cascaded_resolution;
  GridArray primary({np, np, np}, 3, Nonlinearity::triangle());
  init_identity_ramp(primary);
  GridArray cascaded({nc, nc, nc}, 1);
  return DInNetwork::chain(std::move(primary), std::move(cascaded));
}

SdfModel train_sdf(const AnalyticSdf& shape, const SdfTaskConfig& config) {
  Rng rng(derive_seed(config.train.seed, 0x5df0));
  const auto samples = sample_sdf_training_set(shape, config.counts, config.sigma, rng);
  return train_sdf(shape, samples, config);
}

SdfModel train_sdf(const AnalyticSdf& shape, const SdfSampleSet& samples, const SdfTaskConfig& config) {
  if (samples.size() == 0) throw ArgumentError("SDF training needs samples");
  SdfModel model;
  model.layout = solve_layout_sdf(config.budget_bytes, config.rho);
  model.net = make_sdf_network(model.layout);
  if (config.preinit) init_cascaded_from_samples(model.net.cascaded(), samples);

  TrainOptions options;
  options.config = config.train;
  options.loss = config.loss == SdfLoss::raw_mape ? LossKind::mape : LossKind::mae;
  if (options.config.steps == 0) {
    const std::size_t total = samples.size() * static_cast<std::size_t>(config.epochs);
    options.config.steps = static_cast<std::int64_t>((total + config.train.batch_size - 1) / config.train.batch_size);
  }
  Rng rng(derive_seed(config.train.seed, 0x5df1));
  const std::size_t batch_size = config.train.batch_size;
  std::vector<std::uint32_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  std::size_t cursor = order.size();
  const SdfSampleSet* current = &samples;
  SdfSampleSet fresh;
  Rng gen(derive_seed(config.train.seed, 0x5df2));
  bool first = true;
  auto source = [&](std::int64_t, SampleBatch& batch) {
    batch.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      if (cursor == order.size()) {
        if (config.resample && !first) {
          fresh = sample_sdf_training_set(shape, {samples.near_count, samples.uniform_count}, config.sigma, gen);
          current = &fresh;
        }
        first = false;
        for (std::size_t j = order.size(); j > 1; --j) {
          const auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(j));
          std::swap(order[j - 1], order[std::min(k, j - 1)]);
        }
        cursor = 0;
      }
      const std::size_t s = order[cursor++];
      auto in = batch.input(i);
      for (int j = 0; j < 3; ++j) in[j] = static_cast<float>(current->positions[s][j]);
      batch.target(i)[0] = config.loss == SdfLoss::raw_mape ? static_cast<float>(current->distances[s])
                                                            : current->targets[s];
    }
  };
  model.report = train_network(model.net, source, options);
  return model;
}

float sdf_network(const DInNetwork& net, const Vec3& pos) {
  const float in[3] = {static_cast<float>(pos[0]), static_cast<float>(pos[1]), static_cast<float>(pos[2])};
  return net.forward(in)[0];
}

std::vector<Vec3> sample_sdf_test_points(const AnalyticSdf& shape, std::size_t count, double sigma, Rng& rng) {
  SdfSampleCounts counts{count, 0};
  return sample_sdf_training_set(shape, counts, sigma, rng).positions;
}

std::optional<double> occupancy_iou(const std::vector<bool>& a, const std::vector<bool>& b) {
  if (a.size() != b.size()) throw ArgumentError("occupancy sets differ in size");
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    both += a[i] && b[i];
    either += a[i] || b[i];
  }
  if (either == 0) return std::nullopt;
  return static_cast<double>(both) / static_cast<double>(either);
}

SdfMetrics eval_sdf(const DInNetwork& net, const AnalyticSdf& shape, std::span<const Vec3> points) {
  SdfMetrics m;
  m.points = points.size();
  std::vector<bool> predicted(points.size());
  std::vector<bool> reference(points.size());
  auto pass = net.make_pass();
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const float in[3] = {static_cast<float>(points[i][0]), static_cast<float>(points[i][1]),
                         static_cast<float>(points[i][2])};
    net.forward(in, pass);
    const float out = pass.output[0];
    const float target = tsdf_target(sdf_reference(shape, points[i]));
    predicted[i] = out < 0.0f;
    reference[i] = target < 0.0f;
    abs_sum += std::abs(static_cast<double>(out) - target);
    m.sign_errors += predicted[i] != reference[i];
  }
  m.iou = occupancy_iou(predicted, reference);
  m.mae = points.empty() ? 0.0 : abs_sum / static_cast<double>(points.size());
  return m;
}

double sign_agreement(const DInNetwork& a, const DInNetwork& b, std::span<const Vec3> points) {
  if (points.empty()) throw ArgumentError("sign agreement needs test points");
  std::size_t same = 0;
  for (const auto& p : points) same += (sdf_network(a, p) < 0.0f) == (sdf_network(b, p) < 0.0f);
  return static_cast<double>(same) / static_cast<double>(points.size());
}

void export_sign_grid(const DInNetwork& net, int resolution, const std::filesystem::path& path) {
  if (resolution < 2) throw ArgumentError("sign grid needs at least 2 vertices per axis");
  if (net.input_dims() != 3) throw ConfigError("sign grid export needs a 3-input network");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const std::uint32_t r = static_cast<std::uint32_t>(resolution);
  for (int i = 0; i < 3; ++i) {
    const unsigned char le[4] = {static_cast<unsigned char>(r), static_cast<unsigned char>(r >> 8),
                                 static_cast<unsigned char>(r >> 16), static_cast<unsigned char>(r >> 24)};
    out.write(reinterpret_cast<const char*>(le), 4);
  }
  std::vector<char> row(static_cast<std::size_t>(resolution));
  const double step = 1.0 / (resolution - 1);
  for (int z = 0; z < resolution; ++z) {
    for (int y = 0; y < resolution; ++y) {
      for (int x = 0; x < resolution; ++x) row[x] = sdf_network(net, {x * step, y * step, z * step}) < 0.0f ? 1 : 0;
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace din
