#pragma once

// Central-difference gradient checks against the oracle, shared by the unit
// tests and the acceptance runner.

#include <cmath>
#include <random>
#include <vector>

#include "din/grid.hpp"
#include "oracles.hpp"

namespace gradcheck {

inline constexpr double kStep = 1e-4;
inline constexpr double kRelTol = 1e-5;
inline constexpr double kAbsTol = 1e-8;
inline constexpr double kSmall = 1e-3;

inline bool close(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  if (std::abs(analytic) < kSmall) return diff <= kAbsTol || diff <= kRelTol * std::abs(numeric);
  return diff <= kRelTol * std::max(std::abs(analytic), std::abs(numeric));
}

inline oracle::Array to_oracle(const din::Grid<double>& g) {
  oracle::Array a;
  a.shape = g.shape();
  a.channels = g.channels();
  a.cells.assign(g.cells().begin(), g.cells().end());
  const auto nl = g.nonlinearity();
  switch (nl.kind) {
    case din::NonlinearityKind::triangle: a.f = oracle::triangle; break;
    case din::NonlinearityKind::sine: {
      const double n = nl.frequency;
      a.f = [n](double v) { return oracle::sine(v, n); };
      break;
    }
    case din::NonlinearityKind::none: break;
  }
  return a;
}

// Cells stay at least 0.01 away from integers so the triangle kinks never
// fall inside a finite-difference stencil.
inline din::Grid<double> random_grid(std::mt19937_64& rng, int d, int n, int c, din::Nonlinearity nl) {
  std::vector<int> shape(d);
  std::uniform_int_distribution<int> side(2, n);
  for (auto& s : shape) s = side(rng);
  din::Grid<double> g(shape, c, nl);
  std::uniform_real_distribution<double> cell(-2.0, 3.0);
  for (auto& v : g.cells()) {
    do v = cell(rng);
    while (std::abs(v - std::round(v)) < 0.01);
  }
  return g;
}

// Interior query: every per-axis fraction in [0.05, 0.95].
inline std::vector<double> random_query(std::mt19937_64& rng, const din::Grid<double>& g) {
  std::vector<double> x(g.dims());
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  for (int j = 0; j < g.dims(); ++j) {
    const int cells = g.resolution(j) - 1;
    std::uniform_int_distribution<int> pick(0, cells - 1);
    x[j] = (pick(rng) + frac(rng)) / cells;
  }
  return x;
}

struct Result {
  int checked = 0;
  int failed = 0;
};

inline void check_coords(const din::Grid<double>& g, const std::vector<double>& x, Result& r) {
  const auto jac = din::grad_coords<double>(g, x);
  const auto a = to_oracle(g);
  const int d = g.dims();
  for (int j = 0; j < d; ++j) {
    auto xp = x;
    auto xm = x;
    xp[j] += kStep;
    xm[j] -= kStep;
    const auto op = oracle::interpolate(a, xp);
    const auto om = oracle::interpolate(a, xm);
    for (int c = 0; c < g.channels(); ++c) {
      const double fd = (op[c] - om[c]) / (2.0 * kStep);
      ++r.checked;
      if (!close(jac[c * d + j], fd)) ++r.failed;
    }
  }
}

// Gradient of L = sum_c w_c o_c w.r.t. every touched cell, with random w.
inline void check_cells(const din::Grid<double>& g, const std::vector<double>& x, std::mt19937_64& rng, Result& r) {
  std::uniform_real_distribution<double> wdist(-1.0, 1.0);
  std::vector<double> w(g.channels());
  for (auto& v : w) v = wdist(rng);
  auto grad = din::make_grad_buffer(g);
  din::grad_cells<double>(g, x, w, grad);
  auto a = to_oracle(g);
  auto loss = [&](const oracle::Array& arr) {
    const auto o = oracle::interpolate(arr, x);
    double s = 0.0;
    for (int c = 0; c < g.channels(); ++c) s += w[c] * o[c];
    return s;
  };
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const double keep = a.cells[i];
    a.cells[i] = keep + kStep;
    const double lp = loss(a);
    a.cells[i] = keep - kStep;
    const double lm = loss(a);
    a.cells[i] = keep;
    const double fd = (lp - lm) / (2.0 * kStep);
    ++r.checked;
    if (!close(grad[i], fd)) ++r.failed;
  }
}

inline din::Nonlinearity nonlinearity_for(int k) {
  switch (k % 4) {
    case 0: return din::Nonlinearity::identity();
    case 1: return din::Nonlinearity::triangle();
    case 2: return din::Nonlinearity::sine(1.0f);
    default: return din::Nonlinearity::sine(3.0f);
  }
}

}  // namespace gradcheck
