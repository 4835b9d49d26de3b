#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "din/network.hpp"

namespace din {

inline constexpr char kModelMagic[4] = {'D', 'I', 'N', '1'};
inline constexpr std::uint32_t kModelVersion = 1;

/// Binary model format, little-endian:
///
///   "DIN1"  u32 version  u16 array_count
///   per array (primaries in order, then the cascaded array):
///     u8 dims  u32 resolution[dims]  u16 channels
///     u8 nonlinearity (0 none, 1 triangle, 2 sine)  [f32 frequency if sine]
///     u8 quantization (0 f32 payload, 1 u8 payload)
///       0: f32 cells
///       1: (f32 offset, f32 scale) per channel, then u8 codes
///     cells row-major over vertices, channels interleaved
///   u16 cascaded_axis_count, per axis (u16 primary, u16 channel)
std::vector<std::uint8_t> encode_model(const DInNetwork& net);
DInNetwork decode_model(std::span<const std::uint8_t> bytes);

void save_model(const DInNetwork& net, const std::filesystem::path& path);
DInNetwork load_model(const std::filesystem::path& path);

/// Header fields of a model file without materialising the network.
struct ModelArrayInfo {
  std::vector<int> shape;
  int channels = 0;
  NonlinearityKind nonlinearity = NonlinearityKind::none;
  float frequency = 1.0f;
  bool quantized = false;
  std::size_t payload_bytes = 0;
};

struct ModelInfo {
  std::uint32_t version = 0;
  std::vector<ModelArrayInfo> arrays;
  std::vector<Wire> wiring;
  std::size_t file_bytes = 0;
};

ModelInfo describe_model(const DInNetwork& net);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace din
