#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "din/layout.hpp"
#include "din/network.hpp"
#include "din/random.hpp"
#include "din/trainer.hpp"

namespace din {

using Vec3 = std::array<double, 3>;

enum class ShapeKind { sphere, box, torus };

std::string_view to_string(ShapeKind kind);
ShapeKind parse_shape_kind(std::string_view name);

/// Analytic shape inside the unit cube; distances are negative inside.
/// sphere: size[0] = radius. box: size = half extents.
/// torus (axis z): size[0] = major radius R, size[1] = minor radius r.
struct AnalyticSdf {
  ShapeKind kind = ShapeKind::sphere;
  Vec3 center{0.5, 0.5, 0.5};
  Vec3 size{0.25, 0.0, 0.0};

  static AnalyticSdf sphere(Vec3 center, double radius);
  static AnalyticSdf box(Vec3 center, Vec3 half_extents);
  static AnalyticSdf torus(Vec3 center, double major, double minor);
};

double sdf_reference(const AnalyticSdf& shape, const Vec3& pos);

/// Area-uniform point on the surface with its outward unit normal.
struct SurfacePoint {
  Vec3 position;
  Vec3 normal;
};
SurfacePoint sample_surface(const AnalyticSdf& shape, Rng& rng);

/// Quantized target: +1 for d >= 0, -1 otherwise.
inline float tsdf_target(double d) { return d >= 0.0 ? 1.0f : -1.0f; }

struct SdfSampleCounts {
  std::size_t near = 2'000'000;
  std::size_t uniform = 40'000;  // 50:1
};

struct SdfSampleSet {
  std::vector<Vec3> positions;   // near-surface samples first, then uniform
  std::vector<double> distances; // exact distance at the (clamped) position
  std::vector<float> targets;    // +-1
  std::size_t near_count = 0;
  std::size_t uniform_count = 0;

  std::size_t size() const { return positions.size(); }
};

/// Near-surface points are surface samples offset along the normal by
/// N(0, sigma); uniform points fill the cube. Positions are clamped to [0, 1]^3.
SdfSampleSet sample_sdf_training_set(const AnalyticSdf& shape, const SdfSampleCounts& counts, double sigma, Rng& rng);

/// Nearest-neighbour lookup over sample positions with a uniform bucket
/// grid. Ties resolve to the lower sample index.
class NearestSampleIndex {
 public:
  explicit NearestSampleIndex(std::span<const Vec3> points, int buckets_per_axis = 0);
  std::size_t nearest(const Vec3& q) const;

 private:
  int bucket_of(double v) const;
  std::span<const Vec3> points_;
  int n_ = 1;
  std::vector<std::uint32_t> start_;  // CSR offsets, n^3 + 1
  std::vector<std::uint32_t> items_;
};

std::size_t nearest_sample_brute(std::span<const Vec3> points, const Vec3& q);

/// Sets every cascaded vertex (at i / (N - 1) per axis) to the target of
/// its nearest training sample.
void init_cascaded_from_samples(GridArray& cascaded, const SdfSampleSet& samples, bool brute_force = false);

enum class SdfLoss {
  tsdf,      // +-1 targets, MAE
  raw_mape,  // raw distances, relative error
};

struct SdfTaskConfig {
  std::uint64_t budget_bytes = 819200;  // 64^3 x 3 + 32^3
  double rho = 2.0;
  SdfSampleCounts counts;
  double sigma = 0.01;
  int epochs = 4;  // passes over the sample set when train.steps == 0
  bool preinit = true;
  /// Draw a fresh sample set (same counts) for every epoch after the first.
  bool resample = false;
  SdfLoss loss = SdfLoss::tsdf;
  TrainConfig train;
};

struct SdfModel {
  DInNetwork net;
  Layout layout;
  TrainReport report;
};

/// 3D primary (3 channels, triangle, ramp) into a 3D single-channel cascaded.
DInNetwork make_sdf_network(const Layout& layout);

SdfModel train_sdf(const AnalyticSdf& shape, const SdfTaskConfig& config);
SdfModel train_sdf(const AnalyticSdf& shape, const SdfSampleSet& samples, const SdfTaskConfig& config);

/// Network value at a position (positive outside).
float sdf_network(const DInNetwork& net, const Vec3& pos);

/// Near-surface test points (surface + N(0, sigma) normal offset, clamped).
std::vector<Vec3> sample_sdf_test_points(const AnalyticSdf& shape, std::size_t count, double sigma, Rng& rng);

/// |both inside| / |either inside|; nullopt when neither set has an inside point.
std::optional<double> occupancy_iou(const std::vector<bool>& a, const std::vector<bool>& b);

struct SdfMetrics {
  std::optional<double> iou;
  double mae = 0.0;            // against +-1 targets
  std::size_t sign_errors = 0;
  std::size_t points = 0;
};

SdfMetrics eval_sdf(const DInNetwork& net, const AnalyticSdf& shape, std::span<const Vec3> points);

/// Fraction of points where two networks give the same sign.
double sign_agreement(const DInNetwork& a, const DInNetwork& b, std::span<const Vec3> points);

/// Raw dense sign grid: u32 x3 resolution header, then one u8 per vertex
/// (1 inside, 0 outside), x fastest.
void export_sign_grid(const DInNetwork& net, int resolution, const std::filesystem::path& path);

}  // namespace din
