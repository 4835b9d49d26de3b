#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "din/error.hpp"
#include "din/grid.hpp"

namespace din {

/// Source of one cascaded-array axis: channel `channel` of primary `primary`.
struct Wire {
  std::uint16_t primary = 0;
  std::uint16_t channel = 0;

  friend bool operator==(const Wire&, const Wire&) = default;
};

/// Per-query intermediates of a forward pass, reused by the backward pass.
template <std::floating_point T>
struct NetworkPass {
  std::vector<Stencil<T>> primary_stencils;
  std::vector<T> primary_out;     // concatenated primary outputs
  std::vector<T> cascaded_coord;  // one entry per cascaded axis
  Stencil<T> cascaded_stencil;
  std::vector<T> output;
  // backward scratch
  std::vector<T> coord_grad;
  std::vector<T> primary_upstream;
};

/// Differentiable indirection: primary arrays whose outputs, routed by an
/// explicit wiring table, form the coordinate into one cascaded array.
///
/// Inputs to forward/backward are the primaries' coordinates concatenated in
/// primary order. Primaries must produce values in [0, 1]: either a periodic
/// nonlinearity or cells already baked into that range.
template <std::floating_point T>
class Network {
 public:
  Network() = default;

  Network(std::vector<Grid<T>> primaries, Grid<T> cascaded, std::vector<Wire> wiring)
      : primaries_(std::move(primaries)), cascaded_(std::move(cascaded)), wiring_(std::move(wiring)) {
    validate();
    index_primaries();
  }

  /// Single primary whose channel i feeds cascaded axis i.
  static Network chain(Grid<T> primary, Grid<T> cascaded) {
    std::vector<Wire> wiring;
    for (int c = 0; c < primary.channels(); ++c) wiring.push_back({0, static_cast<std::uint16_t>(c)});
    std::vector<Grid<T>> primaries;
    primaries.push_back(std::move(primary));
    return Network(std::move(primaries), std::move(cascaded), std::move(wiring));
  }

  const std::vector<Grid<T>>& primaries() const { return primaries_; }
  const Grid<T>& primary(std::size_t i) const { return primaries_.at(i); }
  Grid<T>& primary(std::size_t i) { return primaries_.at(i); }
  const Grid<T>& cascaded() const { return cascaded_; }
  Grid<T>& cascaded() { return cascaded_; }
  const std::vector<Wire>& wiring() const { return wiring_; }

  /// Arrays in storage order: primaries, then the cascaded array.
  std::size_t array_count() const { return primaries_.size() + 1; }
  const Grid<T>& array(std::size_t i) const { return i < primaries_.size() ? primaries_[i] : cascaded_; }
  Grid<T>& array(std::size_t i) { return i < primaries_.size() ? primaries_[i] : cascaded_; }

  int input_dims() const { return total_input_dims_; }
  int output_channels() const { return cascaded_.channels(); }

  void validate() const {
    if (primaries_.empty()) throw ConfigError("network needs at least one primary array");
    if (static_cast<int>(wiring_.size()) != cascaded_.dims()) {
      throw ConfigError("wiring lists " + std::to_string(wiring_.size()) + " axes, cascaded array has " +
                        std::to_string(cascaded_.dims()));
    }
    int total_channels = 0;
    for (const auto& p : primaries_) total_channels += p.channels();
    if (total_channels != cascaded_.dims()) {
      throw ConfigError("primary output channels (" + std::to_string(total_channels) +
                        ") must equal cascaded dimensionality (" + std::to_string(cascaded_.dims()) + ")");
    }
    std::vector<std::vector<bool>> used(primaries_.size());
    for (std::size_t p = 0; p < primaries_.size(); ++p) used[p].assign(primaries_[p].channels(), false);
    for (const auto& w : wiring_) {
      if (w.primary >= primaries_.size() || w.channel >= primaries_[w.primary].channels()) {
        throw ConfigError("wire references a missing primary output");
      }
      if (used[w.primary][w.channel]) throw ConfigError("primary output channel wired twice");
      used[w.primary][w.channel] = true;
    }
    for (std::size_t p = 0; p < primaries_.size(); ++p) {
      const auto& g = primaries_[p];
      if (g.nonlinearity().periodic()) continue;
      for (T v : g.cells()) {
        if (!(v >= T(0) && v <= T(1))) {
          throw ConfigError("primary " + std::to_string(p) +
                            " has no periodic nonlinearity and cells outside [0, 1]");
        }
      }
    }
  }

  NetworkPass<T> make_pass() const {
    NetworkPass<T> pass;
    pass.primary_stencils.resize(primaries_.size());
    pass.primary_out.resize(static_cast<std::size_t>(cascaded_.dims()));
    pass.cascaded_coord.resize(static_cast<std::size_t>(cascaded_.dims()));
    pass.output.resize(static_cast<std::size_t>(cascaded_.channels()));
    pass.coord_grad.resize(static_cast<std::size_t>(cascaded_.dims()));
    pass.primary_upstream.resize(static_cast<std::size_t>(cascaded_.dims()));
    return pass;
  }

  void forward(std::span<const T> inputs, NetworkPass<T>& pass) const {
    if (static_cast<int>(inputs.size()) != total_input_dims_) {
      throw ConfigError("network expects " + std::to_string(total_input_dims_) + " input components, got " +
                        std::to_string(inputs.size()));
    }
    for (std::size_t p = 0; p < primaries_.size(); ++p) {
      const auto& g = primaries_[p];
      pass.primary_stencils[p] = g.stencil(inputs.subspan(input_offset_[p], g.dims()));
      g.evaluate(pass.primary_stencils[p], std::span<T>(pass.primary_out).subspan(channel_offset_[p], g.channels()));
    }
    for (std::size_t a = 0; a < wiring_.size(); ++a) {
      pass.cascaded_coord[a] = pass.primary_out[channel_offset_[wiring_[a].primary] + wiring_[a].channel];
    }
    pass.cascaded_stencil = cascaded_.stencil(pass.cascaded_coord);
    cascaded_.evaluate(pass.cascaded_stencil, pass.output);
  }

  std::vector<T> forward(std::span<const T> inputs) const {
    auto pass = make_pass();
    forward(inputs, pass);
    return pass.output;
  }

  /// Accumulates dL/dcells for every array given dL/doutput. `grads` is
  /// indexed like array(i). Requires a pass filled by forward().
  void backward(NetworkPass<T>& pass, std::span<const T> upstream, std::span<GradBuffer<T>> grads) const {
    check_grads(grads);
    cascaded_.accumulate_cell_grad(pass.cascaded_stencil, upstream, grads[primaries_.size()]);
    cascaded_.backprop_coords(pass.cascaded_stencil, upstream, pass.coord_grad);
    for (std::size_t a = 0; a < wiring_.size(); ++a) {
      pass.primary_upstream[channel_offset_[wiring_[a].primary] + wiring_[a].channel] = pass.coord_grad[a];
    }
    for (std::size_t p = 0; p < primaries_.size(); ++p) {
      const auto& g = primaries_[p];
      g.accumulate_cell_grad(pass.primary_stencils[p],
                             std::span<const T>(pass.primary_upstream).subspan(channel_offset_[p], g.channels()),
                             grads[p]);
    }
  }

  void backward(std::span<const T> inputs, std::span<const T> upstream, std::span<GradBuffer<T>> grads) const {
    auto pass = make_pass();
    forward(inputs, pass);
    backward(pass, upstream, grads);
  }

  std::vector<GradBuffer<T>> make_grad_buffers() const {
    std::vector<GradBuffer<T>> grads;
    for (std::size_t i = 0; i < array_count(); ++i) grads.push_back(make_grad_buffer(array(i)));
    return grads;
  }

  /// Re-derives cached offsets; call after replacing arrays in place.
  void refresh() {
    validate();
    index_primaries();
  }

 private:
  void index_primaries() {
    input_offset_.clear();
    channel_offset_.clear();
    int in = 0;
    int ch = 0;
    for (const auto& p : primaries_) {
      input_offset_.push_back(static_cast<std::size_t>(in));
      channel_offset_.push_back(static_cast<std::size_t>(ch));
      in += p.dims();
      ch += p.channels();
    }
    total_input_dims_ = in;
  }

  void check_grads(std::span<GradBuffer<T>> grads) const {
    if (grads.size() != array_count()) throw ConfigError("one gradient buffer per array is required");
    for (std::size_t i = 0; i < array_count(); ++i) {
      if (grads[i].size() != array(i).size()) throw ConfigError("gradient buffer shape mismatch");
    }
  }

  std::vector<Grid<T>> primaries_;
  Grid<T> cascaded_;
  std::vector<Wire> wiring_;
  std::vector<std::size_t> input_offset_;
  std::vector<std::size_t> channel_offset_;
  int total_input_dims_ = 0;
};

using GridArray = Grid<float>;
using DInNetwork = Network<float>;

/// Quantizes the selected arrays to 8 bits (primaries on [0, 1], the
/// cascaded array per channel on its min/max range).
template <std::floating_point T>
Network<T> quantize_network(const Network<T>& net, bool primaries = true, bool cascaded = true) {
  std::vector<Grid<T>> ps;
  for (const auto& p : net.primaries()) ps.push_back(primaries ? quantize8(p) : p);
  Grid<T> c = cascaded ? quantize8(net.cascaded()) : net.cascaded();
  return Network<T>(std::move(ps), std::move(c), net.wiring());
}

}  // namespace din
