#include <cmath>
#include <cstdint>
#include <limits>

#include "din/error.hpp"
#include "din/layout.hpp"
#include "doctest.h"

namespace {

// Exhaustive re-search over a fixed N_c range, written without the solver's
// early exit.
struct Pick {
  int np = 0;
  int nc = 0;
};

template <class Bytes>
Pick brute_force(double uncompressed, double e, double rho, int max_nc, Bytes bytes) {
  Pick best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int nc = 4; nc <= max_nc; nc += 4) {
    int np = static_cast<int>(std::floor(rho * nc / 8.0 + 0.5)) * 8;
    if (np < 8) np = 8;
    const double err = std::abs(e - uncompressed / static_cast<double>(bytes(np, nc)));
    if (err < best_err) {
      best_err = err;
      best = {np, nc};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("nearest_multiple") {
  CHECK(din::nearest_multiple(976.0, 8) == 976);
  CHECK(din::nearest_multiple(979.9, 8) == 976);
  CHECK(din::nearest_multiple(980.1, 8) == 984);
  CHECK(din::nearest_multiple(1.0, 8) == 8);
  CHECK(din::nearest_multiple(0.0, 4) == 4);
}

TEST_CASE("byte formulas") {
  CHECK(din::image_layout_bytes(976, 244, 3, 2) == 2u * 976 * 976 + 3u * 244 * 244);
  CHECK(din::image_layout_bytes(736, 16, 3, 4) == 4u * 736 * 736 + 3u * 16 * 16 * 16 * 16);
  CHECK(din::sampler_layout_bytes(512, 32, 8, 8, 3) == 3u * 512 * 512 + 32u + 3u * 512 * 8);
  CHECK(din::sdf_layout_bytes(64, 32) == 819200u);
}

TEST_CASE("image layout: 2048 RGB at 6x with rho 4, 2D cascaded") {
  const auto l = din::solve_layout_image(2048, 3, 6.0, 4.0, 2);
  CHECK(l.primary_resolution == 976);
  CHECK(l.cascaded_resolution == 244);
  CHECK(l.achieved_bytes == 2u * 976 * 976 + 3u * 244 * 244);
  CHECK(l.uncompressed_bytes == 2048u * 2048u * 3u);
  CHECK(l.achieved_compression == doctest::Approx(6.0384).epsilon(1e-4));
}

TEST_CASE("image layout: 4096 RGB at 6x with rho 128 matches exhaustive search") {
  const auto l = din::solve_layout_image(4096, 3, 6.0, 128.0);
  const auto want = brute_force(4096.0 * 4096.0 * 3.0, 6.0, 128.0, 64,
                                [](int np, int nc) { return din::image_layout_bytes(np, nc, 3, 4); });
  CHECK(l.primary_resolution == want.np);
  CHECK(l.cascaded_resolution == want.nc);
  // frozen regression values
  CHECK(l.primary_resolution == 1536);
  CHECK(l.cascaded_resolution == 12);
  CHECK(l.achieved_bytes == 9499392u);
}

TEST_CASE("image layout: very large compression returns the search floor") {
  const auto l = din::solve_layout_image(4096, 3, 1e12, 10.0);
  CHECK(l.cascaded_resolution == 4);
  CHECK(l.primary_resolution == 40);
}

TEST_CASE("image layout: infeasible when the smallest layout does not compress") {
  CHECK_THROWS_AS(din::solve_layout_image(16, 3, 6.0, 64.0), din::InfeasibleLayoutError);
  CHECK_THROWS_AS(din::solve_layout_image(512, 3, 0.0, 4.0), din::ArgumentError);
  CHECK_THROWS_AS(din::solve_layout_image(512, 0, 6.0, 4.0), din::ArgumentError);
}

TEST_CASE("image layout: resolution multiples hold across a sweep") {
  for (int base : {256, 512, 1024, 2048}) {
    for (double e : {3.0, 6.0, 12.0, 24.0}) {
      for (double rho : {4.0, 16.0, 22.0, 64.0}) {
        try {
          const auto l = din::solve_layout_image(base, 3, e, rho);
          CHECK(l.primary_resolution % 8 == 0);
          CHECK(l.cascaded_resolution % 4 == 0);
          const auto want = brute_force(static_cast<double>(base) * base * 3, e, rho, 256,
                                        [](int np, int nc) { return din::image_layout_bytes(np, nc, 3, 4); });
          CHECK(l.primary_resolution == want.np);
          CHECK(l.cascaded_resolution == want.nc);
        } catch (const din::InfeasibleLayoutError&) {
          const auto floor = din::image_layout_bytes(din::nearest_multiple(rho * 4, 8), 4, 3, 4);
          CHECK(floor > static_cast<std::uint64_t>(base) * base * 3);
        }
      }
    }
  }
}

TEST_CASE("sampler layout: LOD resolution by base size") {
  const auto l1 = din::solve_layout_sampler(1024, 3, 6.0, 64.0);
  CHECK(l1.lod_resolution == 8);
  CHECK(l1.footprint_resolution == 32);
  const auto l4 = din::solve_layout_sampler(4096, 3, 6.0, 64.0);
  CHECK(l4.lod_resolution == 12);
  CHECK(l4.footprint_resolution == 48);
  CHECK(din::sampler_lod_resolution(2048) == 12);
}

TEST_CASE("sampler layout: 1024 RGB at 6x with rho 64 matches exhaustive search") {
  const auto l = din::solve_layout_sampler(1024, 3, 6.0, 64.0);
  const auto want = brute_force(1024.0 * 1024.0 * 3.0, 6.0, 64.0, 64,
                                [](int np, int nc) { return din::sampler_layout_bytes(np, 32, 8, nc, 3); });
  CHECK(l.primary_resolution == want.np);
  CHECK(l.cascaded_resolution == want.nc);
  // frozen regression values
  CHECK(l.primary_resolution == 512);
  CHECK(l.cascaded_resolution == 8);
  CHECK(l.achieved_bytes == 798752u);
}

TEST_CASE("sdf layout: budget form") {
  const auto l = din::solve_layout_sdf(819200, 2.0);
  CHECK(l.primary_resolution == 64);
  CHECK(l.cascaded_resolution == 32);
  CHECK(l.achieved_bytes == 819200u);
  CHECK_THROWS_AS(din::solve_layout_sdf(100, 2.0), din::InfeasibleLayoutError);
}
