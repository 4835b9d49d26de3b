#include "din/model_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace din {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(get(1, what)); }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw FormatError(std::string("truncated payload while reading ") + what, pos_);
    }
  }
  std::uint64_t get(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_array(Writer& w, const GridArray& g) {
  w.u8(static_cast<std::uint8_t>(g.dims()));
  for (int n : g.shape()) w.u32(static_cast<std::uint32_t>(n));
  w.u16(static_cast<std::uint16_t>(g.channels()));
  w.u8(static_cast<std::uint8_t>(g.nonlinearity().kind));
  if (g.nonlinearity().kind == NonlinearityKind::sine) w.f32(g.nonlinearity().frequency);
  if (g.quantized()) {
    const auto& q = g.quantization();
    w.u8(1);
    for (int c = 0; c < g.channels(); ++c) {
      w.f32(q.offset[c]);
      w.f32(q.scale[c]);
    }
    w.bytes(q.codes);
  } else {
    w.u8(0);
    for (float v : g.cells()) w.f32(v);
  }
}

GridArray read_array(Reader& r) {
  const std::size_t start = r.offset();
  const int dims = r.u8("array dims");
  if (dims < 1 || dims > kMaxDims) throw FormatError("array dimensionality " + std::to_string(dims) + " out of range", start);
  std::vector<int> shape;
  for (int j = 0; j < dims; ++j) {
    const std::size_t at = r.offset();
    const std::uint32_t n = r.u32("array resolution");
    if (n < 2 || n > (1u << 24)) throw FormatError("array resolution " + std::to_string(n) + " out of range", at);
    shape.push_back(static_cast<int>(n));
  }
  const std::size_t ch_at = r.offset();
  const int channels = r.u16("array channels");
  if (channels < 1) throw FormatError("array has no channels", ch_at);

  const std::size_t nl_at = r.offset();
  const std::uint8_t nl_id = r.u8("nonlinearity id");
  Nonlinearity nl;
  switch (nl_id) {
    case 0:
      break;
    case 1:
      nl = Nonlinearity::triangle();
      break;
    case 2:
      nl = Nonlinearity::sine(r.f32("sine frequency"));
      break;
    default:
      throw FormatError("unknown nonlinearity id " + std::to_string(nl_id), nl_at);
  }
  GridArray g(shape, channels, nl);

  const std::size_t q_at = r.offset();
  const std::uint8_t q_id = r.u8("quantization id");
  if (q_id == 0) {
    auto cells = g.cells();
    for (auto& v : cells) v = r.f32("f32 cells");
  } else if (q_id == 1) {
    if (nl.periodic()) throw FormatError("quantized arrays must have their nonlinearity baked", nl_at);
    Quantization q;
    for (int c = 0; c < channels; ++c) {
      q.offset.push_back(r.f32("quantization offset"));
      q.scale.push_back(r.f32("quantization scale"));
    }
    auto codes = r.bytes(g.size(), "u8 cells");
    q.codes.assign(codes.begin(), codes.end());
    g.attach_quantization(std::move(q));
  } else {
    throw FormatError("unknown quantization id " + std::to_string(q_id), q_at);
  }
  return g;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const DInNetwork& net) {
  Writer w;
  for (char c : kModelMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kModelVersion);
  w.u16(static_cast<std::uint16_t>(net.array_count()));
  for (std::size_t i = 0; i < net.array_count(); ++i) write_array(w, net.array(i));
  w.u16(static_cast<std::uint16_t>(net.wiring().size()));
  for (const auto& wire : net.wiring()) {
    w.u16(wire.primary);
    w.u16(wire.channel);
  }
  return w.take();
}

DInNetwork decode_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kModelMagic, 4) != 0) {
    throw FormatError("bad magic: expected \"DIN1\"", 0);
  }
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("format version");
  if (version != kModelVersion) {
    throw FormatError("unsupported format version " + std::to_string(version) + ", expected " +
                          std::to_string(kModelVersion),
                      version_at);
  }
  const std::size_t count_at = r.offset();
  const int count = r.u16("array count");
  if (count < 2) throw FormatError("model needs at least two arrays", count_at);

  std::vector<GridArray> arrays;
  for (int i = 0; i < count; ++i) arrays.push_back(read_array(r));
  GridArray cascaded = std::move(arrays.back());
  arrays.pop_back();

  const std::size_t wiring_at = r.offset();
  const int axes = r.u16("wiring axis count");
  std::vector<Wire> wiring;
  for (int a = 0; a < axes; ++a) {
    Wire w;
    w.primary = r.u16("wire primary");
    w.channel = r.u16("wire channel");
    wiring.push_back(w);
  }
  if (!r.done()) throw FormatError("trailing bytes after wiring table", r.offset());
  try {
    return DInNetwork(std::move(arrays), std::move(cascaded), std::move(wiring));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("inconsistent network: ") + e.what(), wiring_at);
  }
}

void save_model(const DInNetwork& net, const std::filesystem::path& path) {
  const auto bytes = encode_model(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

DInNetwork load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_model(bytes);
}

ModelInfo describe_model(const DInNetwork& net) {
  ModelInfo info;
  info.version = kModelVersion;
  for (std::size_t i = 0; i < net.array_count(); ++i) {
    const auto& g = net.array(i);
    ModelArrayInfo a;
    a.shape = g.shape();
    a.channels = g.channels();
    a.nonlinearity = g.nonlinearity().kind;
    a.frequency = g.nonlinearity().frequency;
    a.quantized = g.quantized();
    a.payload_bytes = g.quantized() ? g.size() + 8u * static_cast<std::size_t>(g.channels()) : 4u * g.size();
    info.arrays.push_back(std::move(a));
  }
  info.wiring = net.wiring();
  info.file_bytes = encode_model(net).size();
  return info;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large models.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace din
