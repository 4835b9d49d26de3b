#pragma once

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "din/error.hpp"
#include "din/nonlinearity.hpp"

namespace din {

inline constexpr int kMaxDims = 4;
inline constexpr int kMaxCorners = 1 << kMaxDims;

/// 8-bit storage for an array. Cells are reconstructed as
/// offset[c] + scale[c] * code / 255.
struct Quantization {
  std::vector<std::uint8_t> codes;  // same layout as the cells
  std::vector<float> offset;        // per channel
  std::vector<float> scale;         // per channel

  static float dequantize(std::uint8_t code, float offset, float scale) {
    return offset + scale * (static_cast<float>(code) / 255.0f);
  }
};

/// Corner offsets and multilinear weights of one query, plus what the
/// backward passes need (per-axis fractions and du/dx).
template <std::floating_point T>
struct Stencil {
  int dims = 0;
  int corners = 0;
  std::array<std::size_t, kMaxCorners> offset{};
  std::array<T, kMaxCorners> weight{};
  std::array<T, kMaxDims> frac{};
  std::array<T, kMaxDims> dudx{};  // N_j - 1, or 0 where the coordinate was clamped
};

template <class T>
using GradBuffer = std::vector<T>;

namespace detail {

// Calls fn with a callable pair (value, slope) specialised per nonlinearity so
// the hot loops do not branch on the kind per cell.
template <class T, class Fn>
decltype(auto) with_nonlinearity(const Nonlinearity& nl, Fn&& fn) {
  switch (nl.kind) {
    case NonlinearityKind::triangle:
      return fn([](T v) { return Nonlinearity::triangle_value(v); },
                [](T v) { return Nonlinearity::triangle_slope(v); });
    case NonlinearityKind::sine: {
      const T n = static_cast<T>(nl.frequency);
      return fn([n](T v) { return (T(1) + std::sin(n * v)) / T(2); },
                [n](T v) { return n * std::cos(n * v) / T(2); });
    }
    case NonlinearityKind::none:
      break;
  }
  return fn([](T v) { return v; }, [](T) { return T(1); });
}

}  // namespace detail

/// N-dimensional (1..4) multi-channel lookup array, multilinearly
/// interpolated and differentiable w.r.t. both its cells and the query
/// coordinate.
///
/// Vertex-centered convention: along axis j with N_j vertices, coordinate
/// x_j in [0, 1] maps to u_j = x_j (N_j - 1). Cells are stored row-major over
/// the vertex index (last axis fastest) with channels interleaved.
template <std::floating_point T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(std::vector<int> shape, int channels, Nonlinearity nl = {})
      : shape_(std::move(shape)), channels_(channels), nonlinearity_(nl) {
    if (shape_.empty() || shape_.size() > kMaxDims) {
      throw ArgumentError("grid dimensionality must be in 1.." + std::to_string(kMaxDims) +
                          ", got " + std::to_string(shape_.size()));
    }
    if (channels_ < 1) throw ArgumentError("grid needs at least one channel");
    for (int n : shape_) {
      if (n < 2) throw ArgumentError("every grid axis needs at least 2 vertices");
    }
    strides_.assign(shape_.size(), 0);
    std::size_t stride = static_cast<std::size_t>(channels_);
    for (int j = dims() - 1; j >= 0; --j) {
      strides_[j] = stride;
      stride *= static_cast<std::size_t>(shape_[j]);
    }
    cells_.assign(stride, T(0));
  }

  int dims() const { return static_cast<int>(shape_.size()); }
  int channels() const { return channels_; }
  const std::vector<int>& shape() const { return shape_; }
  int resolution(int axis) const { return shape_.at(axis); }
  std::size_t stride(int axis) const { return strides_.at(axis); }
  std::size_t size() const { return cells_.size(); }
  std::size_t vertex_count() const { return cells_.size() / static_cast<std::size_t>(channels_); }

  std::span<T> cells() { return cells_; }
  std::span<const T> cells() const { return cells_; }

  std::size_t index(std::span<const int> vertex, int channel) const {
    std::size_t idx = static_cast<std::size_t>(channel);
    for (int j = 0; j < dims(); ++j) idx += static_cast<std::size_t>(vertex[j]) * strides_[j];
    return idx;
  }
  T& at(std::span<const int> vertex, int channel) { return cells_[index(vertex, channel)]; }
  T at(std::span<const int> vertex, int channel) const { return cells_[index(vertex, channel)]; }

  void fill(T v) { std::fill(cells_.begin(), cells_.end(), v); }
  void fill_channel(int channel, T v) {
    for (std::size_t i = static_cast<std::size_t>(channel); i < cells_.size(); i += channels_) cells_[i] = v;
  }

  const Nonlinearity& nonlinearity() const { return nonlinearity_; }
  void set_nonlinearity(Nonlinearity nl) { nonlinearity_ = nl; }

  bool quantized() const { return quantization_.has_value(); }
  const Quantization& quantization() const {
    if (!quantization_) throw ArgumentError("grid is not quantized");
    return *quantization_;
  }

  /// Installs 8-bit codes and replaces the cells with their dequantized values.
  void attach_quantization(Quantization q) {
    if (q.codes.size() != cells_.size() || q.offset.size() != static_cast<std::size_t>(channels_) ||
        q.scale.size() != static_cast<std::size_t>(channels_)) {
      throw ArgumentError("quantization tables do not match the grid shape");
    }
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      const std::size_t c = i % static_cast<std::size_t>(channels_);
      cells_[i] = static_cast<T>(Quantization::dequantize(q.codes[i], q.offset[c], q.scale[c]));
    }
    nonlinearity_ = Nonlinearity::identity();
    quantization_ = std::move(q);
  }

  bool same_layout(const Grid& other) const {
    return shape_ == other.shape_ && channels_ == other.channels_;
  }

  /// Clamps x into [0, 1]^d and returns the enclosing corners and weights.
  Stencil<T> stencil(std::span<const T> x) const {
    if (static_cast<int>(x.size()) != dims()) {
      throw ArgumentError("query has " + std::to_string(x.size()) + " components, grid has " +
                          std::to_string(dims()) + " dimensions");
    }
    Stencil<T> s;
    s.dims = dims();
    s.corners = 1 << s.dims;
    std::size_t base = 0;
    for (int j = 0; j < s.dims; ++j) {
      T xj = x[j];
      if (std::isnan(xj)) throw ArgumentError("NaN query coordinate on axis " + std::to_string(j));
      assert(xj > T(-1e-3) && xj < T(1) + T(1e-3));
      const T scale = static_cast<T>(shape_[j] - 1);
      T dudx = scale;
      if (xj < T(0)) {
        xj = T(0);
        dudx = T(0);
      } else if (xj > T(1)) {
        xj = T(1);
        dudx = T(0);
      }
      T u = xj * scale;
      // Snap rounding noise so that x = i / (N - 1) lands exactly on vertex i.
      const T nearest = std::nearbyint(u);
      if (std::abs(u - nearest) <= T(4) * std::numeric_limits<T>::epsilon() * scale) u = nearest;
      const int i0 = std::min(static_cast<int>(u), shape_[j] - 2);
      s.frac[j] = u - static_cast<T>(i0);
      s.dudx[j] = dudx;
      base += static_cast<std::size_t>(i0) * strides_[j];
    }
    for (int b = 0; b < s.corners; ++b) {
      std::size_t off = base;
      T w = T(1);
      for (int j = 0; j < s.dims; ++j) {
        if ((b >> j) & 1) {
          off += strides_[j];
          w *= s.frac[j];
        } else {
          w *= T(1) - s.frac[j];
        }
      }
      s.offset[b] = off;
      s.weight[b] = w;
    }
    return s;
  }

  /// out[c] = sum_b w_b F(cell[b, c]).
  void evaluate(const Stencil<T>& s, std::span<T> out) const {
    const int nc = channels_;
    detail::with_nonlinearity<T>(nonlinearity_, [&](auto value, auto) {
      for (int c = 0; c < nc; ++c) out[c] = T(0);
      for (int b = 0; b < s.corners; ++b) {
        const T* cell = cells_.data() + s.offset[b];
        const T w = s.weight[b];
        for (int c = 0; c < nc; ++c) out[c] += w * value(cell[c]);
      }
    });
  }

  /// Vector-Jacobian product: dx[j] = sum_c upstream[c] * d out[c] / d x[j].
  void backprop_coords(const Stencil<T>& s, std::span<const T> upstream, std::span<T> dx) const {
    std::array<T, kMaxCorners> g{};
    const int nc = channels_;
    detail::with_nonlinearity<T>(nonlinearity_, [&](auto value, auto) {
      for (int b = 0; b < s.corners; ++b) {
        const T* cell = cells_.data() + s.offset[b];
        T acc = T(0);
        for (int c = 0; c < nc; ++c) acc += upstream[c] * value(cell[c]);
        g[b] = acc;
      }
    });
    for (int j = 0; j < s.dims; ++j) {
      T acc = T(0);
      for (int b = 0; b < s.corners; ++b) acc += weight_slope(s, b, j) * g[b];
      dx[j] = acc * s.dudx[j];
    }
  }

  /// Full Jacobian, row-major C x d.
  void coord_jacobian(const Stencil<T>& s, std::span<T> jac) const {
    const int nc = channels_;
    const int d = s.dims;
    std::fill(jac.begin(), jac.begin() + static_cast<std::ptrdiff_t>(nc) * d, T(0));
    detail::with_nonlinearity<T>(nonlinearity_, [&](auto value, auto) {
      for (int b = 0; b < s.corners; ++b) {
        const T* cell = cells_.data() + s.offset[b];
        for (int j = 0; j < d; ++j) {
          const T dw = weight_slope(s, b, j) * s.dudx[j];
          for (int c = 0; c < nc; ++c) jac[c * d + j] += dw * value(cell[c]);
        }
      }
    });
  }

  /// grad[b, c] += w_b F'(cell[b, c]) upstream[c] for the 2^d touched vertices.
  void accumulate_cell_grad(const Stencil<T>& s, std::span<const T> upstream, std::span<T> grad) const {
    const int nc = channels_;
    detail::with_nonlinearity<T>(nonlinearity_, [&](auto, auto slope) {
      for (int b = 0; b < s.corners; ++b) {
        const T* cell = cells_.data() + s.offset[b];
        T* out = grad.data() + s.offset[b];
        const T w = s.weight[b];
        for (int c = 0; c < nc; ++c) out[c] += w * slope(cell[c]) * upstream[c];
      }
    });
  }

  template <std::floating_point U>
  Grid<U> cast() const {
    Grid<U> out(shape_, channels_, nonlinearity_);
    auto dst = out.cells();
    for (std::size_t i = 0; i < cells_.size(); ++i) dst[i] = static_cast<U>(cells_[i]);
    return out;
  }

 private:
  // d w_b / d u_j
  static T weight_slope(const Stencil<T>& s, int b, int j) {
    T p = ((b >> j) & 1) ? T(1) : T(-1);
    for (int k = 0; k < s.dims; ++k) {
      if (k == j) continue;
      p *= ((b >> k) & 1) ? s.frac[k] : T(1) - s.frac[k];
    }
    return p;
  }

  std::vector<int> shape_;
  std::vector<std::size_t> strides_;
  int channels_ = 0;
  std::vector<T> cells_;
  Nonlinearity nonlinearity_;
  std::optional<Quantization> quantization_;
};

template <std::floating_point T>
std::vector<T> interpolate(const Grid<T>& grid, std::span<const T> x) {
  std::vector<T> out(static_cast<std::size_t>(grid.channels()));
  grid.evaluate(grid.stencil(x), out);
  return out;
}

/// d out[c] / d x[j], row-major C x d.
template <std::floating_point T>
std::vector<T> grad_coords(const Grid<T>& grid, std::span<const T> x) {
  std::vector<T> jac(static_cast<std::size_t>(grid.channels() * grid.dims()));
  grid.coord_jacobian(grid.stencil(x), jac);
  return jac;
}

template <std::floating_point T>
void grad_cells(const Grid<T>& grid, std::span<const T> x, std::span<const T> upstream, std::span<T> out) {
  if (out.size() != grid.size()) {
    throw ArgumentError("gradient buffer has " + std::to_string(out.size()) + " entries, grid has " +
                        std::to_string(grid.size()));
  }
  if (upstream.size() != static_cast<std::size_t>(grid.channels())) {
    throw ArgumentError("upstream gradient length does not match the channel count");
  }
  grid.accumulate_cell_grad(grid.stencil(x), upstream, out);
}

template <std::floating_point T>
GradBuffer<T> make_grad_buffer(const Grid<T>& grid) {
  return GradBuffer<T>(grid.size(), T(0));
}

/// Channel m at vertex (i_1..i_d) := i_j / (N_j - 1) with j = m mod d, so the
/// array (composed with a triangle wave or no nonlinearity) is the identity
/// map, repeated over channel groups when C > d.
template <std::floating_point T>
void init_identity_ramp(Grid<T>& grid) {
  const auto nl = grid.nonlinearity().kind;
  if (nl == NonlinearityKind::sine) {
    throw PreconditionError("identity ramp needs a triangle or no nonlinearity");
  }
  const int d = grid.dims();
  const int nc = grid.channels();
  std::vector<int> vertex(static_cast<std::size_t>(d), 0);
  auto cells = grid.cells();
  for (std::size_t v = 0; v < grid.vertex_count(); ++v) {
    for (int m = 0; m < nc; ++m) {
      const int j = m % d;
      cells[v * nc + m] = static_cast<T>(vertex[j]) / static_cast<T>(grid.resolution(j) - 1);
    }
    for (int j = d - 1; j >= 0; --j) {
      if (++vertex[j] < grid.resolution(j)) break;
      vertex[j] = 0;
    }
  }
}

/// Folds the nonlinearity into the cells; the result interpolates identically.
template <std::floating_point T>
Grid<T> bake_nonlinearity(const Grid<T>& grid) {
  Grid<T> out(grid.shape(), grid.channels(), Nonlinearity::identity());
  const auto& nl = grid.nonlinearity();
  auto src = grid.cells();
  auto dst = out.cells();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = nl(src[i]);
  return out;
}

/// 8-bit quantization. Periodic arrays are baked and coded on the fixed
/// range [0, 1]; unbounded arrays use a per-channel min/max affine range.
template <std::floating_point T>
Grid<T> quantize8(const Grid<T>& grid) {
  if (grid.quantized()) return grid;
  const bool bounded = grid.nonlinearity().periodic();
  Grid<T> baked = bounded ? bake_nonlinearity(grid) : grid;
  const int nc = grid.channels();
  auto cells = baked.cells();

  Quantization q;
  q.codes.resize(cells.size());
  q.offset.assign(static_cast<std::size_t>(nc), 0.0f);
  q.scale.assign(static_cast<std::size_t>(nc), 1.0f);
  if (!bounded) {
    for (int c = 0; c < nc; ++c) {
      T lo = std::numeric_limits<T>::infinity();
      T hi = -std::numeric_limits<T>::infinity();
      for (std::size_t i = static_cast<std::size_t>(c); i < cells.size(); i += nc) {
        lo = std::min(lo, cells[i]);
        hi = std::max(hi, cells[i]);
      }
      q.offset[c] = static_cast<float>(lo);
      q.scale[c] = static_cast<float>(hi - lo);
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::size_t c = i % static_cast<std::size_t>(nc);
    if (q.scale[c] == 0.0f) {
      q.codes[i] = 0;
      continue;
    }
    const double t = (static_cast<double>(cells[i]) - q.offset[c]) / q.scale[c] * 255.0;
    q.codes[i] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(t), 0, 255));
  }
  baked.attach_quantization(std::move(q));
  return baked;
}

}  // namespace din
