#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace din {

// Serialized ids are part of the model file format; do not renumber.
enum class NonlinearityKind : std::uint8_t { none = 0, triangle = 1, sine = 2 };

/// Element-wise function applied to array cells before interpolation.
///
/// The periodic variants wrap arbitrary cell values into [0, 1] so that an
/// array's output can be used as a coordinate into another array.
///   triangle: period 2, F(0) = 0, F(1) = 1, identity on [0, 1].
///   sine(n):  (1 + sin(n v)) / 2.
struct Nonlinearity {
  NonlinearityKind kind = NonlinearityKind::none;
  float frequency = 1.0f;  // sine only

  static constexpr Nonlinearity identity() { return {}; }
  static constexpr Nonlinearity triangle() { return {NonlinearityKind::triangle, 1.0f}; }
  static constexpr Nonlinearity sine(float n = 1.0f) { return {NonlinearityKind::sine, n}; }

  constexpr bool periodic() const { return kind != NonlinearityKind::none; }

  template <class T>
  T operator()(T v) const {
    switch (kind) {
      case NonlinearityKind::triangle:
        return triangle_value(v);
      case NonlinearityKind::sine:
        return (T(1) + std::sin(T(frequency) * v)) / T(2);
      case NonlinearityKind::none:
        break;
    }
    return v;
  }

  /// dF/dv. The triangle wave uses the rising-segment slope (+1) at its
  /// breakpoints, so the slope is +1 on [0, 1] and -1 on (1, 2) modulo 2.
  template <class T>
  T derivative(T v) const {
    switch (kind) {
      case NonlinearityKind::triangle:
        return triangle_slope(v);
      case NonlinearityKind::sine:
        return T(frequency) * std::cos(T(frequency) * v) / T(2);
      case NonlinearityKind::none:
        break;
    }
    return T(1);
  }

  template <class T>
  static T wrap2(T v) {
    return v - T(2) * std::floor(v / T(2));
  }
  template <class T>
  static T triangle_value(T v) {
    return T(1) - std::abs(wrap2(v) - T(1));
  }
  template <class T>
  static T triangle_slope(T v) {
    return wrap2(v) <= T(1) ? T(1) : T(-1);
  }

  friend constexpr bool operator==(const Nonlinearity&, const Nonlinearity&) = default;
};

std::string_view to_string(NonlinearityKind kind);

}  // namespace din
