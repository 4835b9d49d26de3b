#include "din/layout.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "din/error.hpp"

namespace din {

namespace {

constexpr int kCascadedStep = 4;
constexpr int kPrimaryStep = 8;
constexpr int kMaxCascaded = 1 << 16;

std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

void check_positive(double e, double rho, int k) {
  if (!(e > 0.0)) throw ArgumentError("compression ratio must be positive");
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  if (k < 1) throw ArgumentError("channel count must be at least 1");
}

// Scans N_c = 4, 8, ... while B_comp grows; `score` maps B_comp to the
// quantity being matched and the scan stops once it has passed the target.
struct Candidate {
  int primary = 0;
  int cascaded = 0;
  std::uint64_t bytes = 0;
};

template <class Bytes, class Error>
Candidate linear_search(double rho, Bytes bytes_for, Error error_of, const std::function<bool(std::uint64_t)>& past_target) {
  Candidate best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int nc = kCascadedStep; nc <= kMaxCascaded; nc += kCascadedStep) {
    const int np = nearest_multiple(rho * nc, kPrimaryStep);
    const std::uint64_t b = bytes_for(np, nc);
    const double err = error_of(b);
    if (err < best_err) {
      best_err = err;
      best = {np, nc, b};
    }
    if (past_target(b)) break;
  }
  return best;
}

}  // namespace

std::string_view to_string(LayoutKind kind) {
  switch (kind) {
    case LayoutKind::image:
      return "image";
    case LayoutKind::sampler:
      return "sampler";
    case LayoutKind::sdf:
      return "sdf";
  }
  return "unknown";
}

int nearest_multiple(double v, int step) {
  const long m = std::lround(v / step);
  return static_cast<int>(std::max(1L, m)) * step;
}

std::uint64_t image_layout_bytes(int primary, int cascaded, int k, int cascaded_dims) {
  return static_cast<std::uint64_t>(cascaded_dims) * ipow(primary, 2) +
         static_cast<std::uint64_t>(k) * ipow(cascaded, cascaded_dims);
}

std::uint64_t sampler_layout_bytes(int primary, int footprint, int lod, int cascaded, int k) {
  return 3 * ipow(primary, 2) + static_cast<std::uint64_t>(footprint) +
         static_cast<std::uint64_t>(k) * ipow(cascaded, 3) * static_cast<std::uint64_t>(lod);
}

std::uint64_t sdf_layout_bytes(int primary, int cascaded) { return 3 * ipow(primary, 3) + ipow(cascaded, 3); }

int sampler_lod_resolution(int base_resolution) { return base_resolution <= 1024 ? 8 : 12; }

Layout solve_layout_image(int width, int height, int k, double e, double rho, int cascaded_dims) {
  check_positive(e, rho, k);
  if (width < 1 || height < 1) throw ArgumentError("image dimensions must be positive");
  if (cascaded_dims < 1 || cascaded_dims > 4) throw ArgumentError("cascaded dimensionality must be in 1..4");
  const std::uint64_t total = static_cast<std::uint64_t>(width) * static_cast<std::uint64_t>(height) *
                              static_cast<std::uint64_t>(k);
  const double B = static_cast<double>(total);
  auto bytes = [&](int np, int nc) { return image_layout_bytes(np, nc, k, cascaded_dims); };

  const std::uint64_t smallest = bytes(nearest_multiple(rho * kCascadedStep, kPrimaryStep), kCascadedStep);
  if (smallest > total) {
    throw InfeasibleLayoutError("smallest image layout needs " + std::to_string(smallest) +
                                " bytes, more than the uncompressed " + std::to_string(total));
  }
  const auto best = linear_search(
      rho, bytes, [&](std::uint64_t b) { return std::abs(e - B / static_cast<double>(b)); },
      [&](std::uint64_t b) { return B / static_cast<double>(b) < e; });

  Layout l;
  l.kind = LayoutKind::image;
  l.rho = rho;
  l.channels = k;
  l.cascaded_dims = cascaded_dims;
  l.primary_resolution = best.primary;
  l.cascaded_resolution = best.cascaded;
  l.uncompressed_bytes = total;
  l.budget_bytes = static_cast<std::uint64_t>(std::llround(B / e));
  l.achieved_bytes = best.bytes;
  l.requested_compression = e;
  l.achieved_compression = B / static_cast<double>(best.bytes);
  return l;
}

Layout solve_layout_image(int base_resolution, int k, double e, double rho, int cascaded_dims) {
  return solve_layout_image(base_resolution, base_resolution, k, e, rho, cascaded_dims);
}

Layout solve_layout_sampler(int base_resolution, int k, double e, double rho) {
  check_positive(e, rho, k);
  if (base_resolution < 2) throw ArgumentError("base resolution must be at least 2");
  const int lod = sampler_lod_resolution(base_resolution);
  const int footprint = 4 * lod;
  const std::uint64_t total = static_cast<std::uint64_t>(base_resolution) * base_resolution * k;
  const double B = static_cast<double>(total);
  auto bytes = [&](int np, int nc) { return sampler_layout_bytes(np, footprint, lod, nc, k); };

  const std::uint64_t smallest = bytes(nearest_multiple(rho * kCascadedStep, kPrimaryStep), kCascadedStep);
  if (smallest > total) {
    throw InfeasibleLayoutError("smallest sampler layout needs " + std::to_string(smallest) +
                                " bytes, more than the uncompressed " + std::to_string(total));
  }
  const auto best = linear_search(
      rho, bytes, [&](std::uint64_t b) { return std::abs(e - B / static_cast<double>(b)); },
      [&](std::uint64_t b) { return B / static_cast<double>(b) < e; });

  Layout l;
  l.kind = LayoutKind::sampler;
  l.rho = rho;
  l.channels = k;
  l.cascaded_dims = 4;
  l.primary_resolution = best.primary;
  l.footprint_resolution = footprint;
  l.lod_resolution = lod;
  l.cascaded_resolution = best.cascaded;
  l.uncompressed_bytes = total;
  l.budget_bytes = static_cast<std::uint64_t>(std::llround(B / e));
  l.achieved_bytes = best.bytes;
  l.requested_compression = e;
  l.achieved_compression = B / static_cast<double>(best.bytes);
  return l;
}

Layout solve_layout_sdf(std::uint64_t budget_bytes, double rho) {
  if (!(rho > 0.0)) throw ArgumentError("rho must be positive");
  auto bytes = [](int np, int nc) { return sdf_layout_bytes(np, nc); };
  const std::uint64_t smallest = bytes(nearest_multiple(rho * kCascadedStep, kPrimaryStep), kCascadedStep);
  if (smallest > budget_bytes) {
    throw InfeasibleLayoutError("budget of " + std::to_string(budget_bytes) +
                                " bytes is below the smallest SDF layout (" + std::to_string(smallest) + ")");
  }
  const double budget = static_cast<double>(budget_bytes);
  const auto best = linear_search(
      rho, bytes, [&](std::uint64_t b) { return std::abs(budget - static_cast<double>(b)); },
      [&](std::uint64_t b) { return b > budget_bytes; });

  Layout l;
  l.kind = LayoutKind::sdf;
  l.rho = rho;
  l.channels = 1;
  l.cascaded_dims = 3;
  l.primary_resolution = best.primary;
  l.cascaded_resolution = best.cascaded;
  l.budget_bytes = budget_bytes;
  l.achieved_bytes = best.bytes;
  return l;
}

}  // namespace din
