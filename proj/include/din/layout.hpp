#pragma once

#include <cstdint>
#include <string_view>

namespace din {

enum class LayoutKind { image, sampler, sdf };

/// Array resolutions resolved under a byte budget. Bytes count one byte per
/// stored channel value (the 8-bit inference representation).
struct Layout {
  LayoutKind kind = LayoutKind::image;
  double rho = 0.0;                      // primary side / cascaded side
  int channels = 0;                      // k, output channels
  int cascaded_dims = 0;
  int primary_resolution = 0;            // N_p (N_p0 for the sampler)
  int footprint_resolution = 0;          // N_p1, sampler only
  int lod_resolution = 0;                // N_lod, sampler only
  int cascaded_resolution = 0;           // N_c
  std::uint64_t uncompressed_bytes = 0;  // B; 0 for budget-driven layouts
  std::uint64_t budget_bytes = 0;        // requested B_comp
  std::uint64_t achieved_bytes = 0;      // B_comp of the chosen resolutions
  double requested_compression = 0.0;    // e; 0 for budget-driven layouts
  double achieved_compression = 0.0;     // B / achieved_bytes
};

std::string_view to_string(LayoutKind kind);

/// Nearest multiple of `step` to v, never below `step`.
int nearest_multiple(double v, int step);

/// 2D primary with `cascaded_dims` channels feeding a `cascaded_dims`-D
/// cascaded array with k channels: cascaded_dims N_p^2 + k N_c^cascaded_dims.
std::uint64_t image_layout_bytes(int primary, int cascaded, int k, int cascaded_dims);

/// 3 N_p0^2 + N_p1 + k N_c^3 N_lod.
std::uint64_t sampler_layout_bytes(int primary, int footprint, int lod, int cascaded, int k);

/// 3D primary with 3 channels into a 3D single-channel cascaded: 3 N_p^3 + N_c^3.
std::uint64_t sdf_layout_bytes(int primary, int cascaded);

/// N_lod for a sampler over a square base texture (8 up to 1K, 12 above).
int sampler_lod_resolution(int base_resolution);

/// Linear search over N_c in multiples of 4 with N_p = nearest multiple of 8
/// to rho N_c, minimising |e - B / B_comp|; ties go to the smaller N_c.
/// Throws InfeasibleLayoutError when even the smallest layout does not
/// compress (B_comp(N_c = 4) > B).
Layout solve_layout_image(int base_resolution, int k, double e, double rho, int cascaded_dims = 4);
Layout solve_layout_image(int width, int height, int k, double e, double rho, int cascaded_dims = 4);

Layout solve_layout_sampler(int base_resolution, int k, double e, double rho);

/// Budget-driven variant: minimises |budget - B_comp|. Throws when the
/// budget is below the smallest layout.
Layout solve_layout_sdf(std::uint64_t budget_bytes, double rho);

}  // namespace din
