#include "din/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include <json.hpp>

#include "din/error.hpp"

namespace din {

ImageBuffer::ImageBuffer(int w, int h, int c, float fill) : width(w), height(h), channels(c) {
  if (w < 1 || h < 1 || c < 1) throw ArgumentError("image dimensions must be positive");
  data.assign(static_cast<std::size_t>(w) * h * c, fill);
}

std::string_view to_string(ChannelRole role) {
  switch (role) {
    case ChannelRole::albedo:
      return "albedo";
    case ChannelRole::ambient_occlusion:
      return "ao";
    case ChannelRole::normal:
      return "normal";
    case ChannelRole::roughness:
      return "roughness";
    case ChannelRole::other:
      return "other";
  }
  return "other";
}

ChannelRole parse_channel_role(std::string_view name) {
  if (name == "albedo" || name == "rgb" || name == "color") return ChannelRole::albedo;
  if (name == "ao" || name == "ambient_occlusion") return ChannelRole::ambient_occlusion;
  if (name == "normal") return ChannelRole::normal;
  if (name == "roughness") return ChannelRole::roughness;
  if (name == "other") return ChannelRole::other;
  throw ConfigError("unknown channel role '" + std::string(name) + "'");
}

std::vector<ChannelRole> default_channel_roles(int k) {
  std::vector<ChannelRole> roles;
  for (int c = 0; c < k; ++c) {
    if (c < 3) {
      roles.push_back(ChannelRole::albedo);
    } else if (c < 6 && k >= 6) {
      roles.push_back(ChannelRole::normal);
    } else if (c == 6) {
      roles.push_back(ChannelRole::ambient_occlusion);
    } else if (c == 7) {
      roles.push_back(ChannelRole::roughness);
    } else {
      roles.push_back(ChannelRole::other);
    }
  }
  return roles;
}

std::vector<float> channel_init_values(std::span<const ChannelRole> roles) {
  std::vector<float> values;
  int normal_component = 0;
  for (auto role : roles) {
    switch (role) {
      case ChannelRole::albedo:
      case ChannelRole::roughness:
        values.push_back(0.5f);
        break;
      case ChannelRole::ambient_occlusion:
        values.push_back(1.0f);
        break;
      case ChannelRole::normal:
        values.push_back(normal_component % 3 == 2 ? 1.0f : 0.5f);
        ++normal_component;
        break;
      case ChannelRole::other:
        values.push_back(0.0f);
        break;
    }
  }
  return values;
}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < buf.size() && !std::isspace(buf[pos]) && buf[pos] != '#') tok.push_back(static_cast<char>(buf[pos++]));
  if (tok.empty()) throw FormatError("truncated PNM header", pos);
  return tok;
}

int header_int(const std::vector<std::uint8_t>& buf, std::size_t& pos) {
  const std::size_t at = pos;
  const std::string tok = next_token(buf, pos);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw FormatError("expected an integer in PNM header, got '" + tok + "'", at);
  }
}

}  // namespace

ImageBuffer read_pnm(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  std::size_t pos = 0;
  const std::string magic = next_token(buf, pos);
  int channels = 0;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw FormatError("unsupported PNM magic '" + magic + "' in " + path.string() + ", expected P6 or P5", 0);
  }
  const int width = header_int(buf, pos);
  const int height = header_int(buf, pos);
  const std::size_t maxval_at = pos;
  const int maxval = header_int(buf, pos);
  if (width < 1 || height < 1) throw FormatError("non-positive PNM dimensions", maxval_at);
  if (maxval != 255) throw FormatError("only 8-bit PNM (maxval 255) is supported", maxval_at);
  ++pos;  // single whitespace byte after maxval
  ImageBuffer img(width, height, channels);
  if (buf.size() < pos + img.data.size()) throw FormatError("truncated PNM pixel data", buf.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(buf[pos + i]) / 255.0f;
  return img;
}

void write_pnm(const ImageBuffer& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw ArgumentError("PNM output needs 1 or 3 channels, image has " + std::to_string(img.channels));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> bytes(img.data.size());
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ImageStack read_image_stack(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open " + manifest.string());
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad image manifest: ") + e.what(), 0);
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw FormatError("image manifest needs a non-empty 'layers' array", 0);
  }
  std::vector<ImageBuffer> layers;
  ImageStack stack;
  for (const auto& layer : doc["layers"]) {
    const auto file = manifest.parent_path() / layer.at("path").get<std::string>();
    auto img = read_pnm(file);
    const auto role = parse_channel_role(layer.value("role", std::string("other")));
    for (int c = 0; c < img.channels; ++c) stack.roles.push_back(role);
    layers.push_back(std::move(img));
  }
  const int w = layers.front().width;
  const int h = layers.front().height;
  if (doc.contains("width") && doc["width"].get<int>() != w) throw FormatError("manifest width disagrees with layers", 0);
  if (doc.contains("height") && doc["height"].get<int>() != h) throw FormatError("manifest height disagrees with layers", 0);
  int k = 0;
  for (const auto& l : layers) {
    if (l.width != w || l.height != h) throw FormatError("stack layers differ in size", 0);
    k += l.channels;
  }
  stack.image = ImageBuffer(w, h, k);
  int base = 0;
  for (const auto& l : layers) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        for (int c = 0; c < l.channels; ++c) stack.image.at(x, y, base + c) = l.at(x, y, c);
      }
    }
    base += l.channels;
  }
  return stack;
}

ImageStack read_image_any(const std::filesystem::path& path) {
  if (path.extension() == ".json") return read_image_stack(path);
  ImageStack s;
  s.image = read_pnm(path);
  s.roles = default_channel_roles(s.image.channels);
  return s;
}

void write_image_any(const ImageBuffer& img, std::span<const ChannelRole> roles, const std::filesystem::path& path) {
  if (img.channels == 1 || img.channels == 3) {
    write_pnm(img, path.extension() == ".json" ? std::filesystem::path(path).replace_extension(".ppm") : path);
    return;
  }
  nlohmann::json doc;
  doc["width"] = img.width;
  doc["height"] = img.height;
  doc["layers"] = nlohmann::json::array();
  const auto stem = path.stem().string();
  int c = 0;
  int index = 0;
  while (c < img.channels) {
    const int n = img.channels - c >= 3 ? 3 : 1;
    ImageBuffer layer(img.width, img.height, n);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        for (int i = 0; i < n; ++i) layer.at(x, y, i) = img.at(x, y, c + i);
      }
    }
    const std::string name = stem + "_" + std::to_string(index++) + (n == 3 ? ".ppm" : ".pgm");
    write_pnm(layer, path.parent_path() / name);
    const auto role = c < static_cast<int>(roles.size()) ? roles[c] : ChannelRole::other;
    doc["layers"].push_back({{"path", name}, {"role", std::string(to_string(role))}});
    c += n;
  }
  std::ofstream out(std::filesystem::path(path).replace_extension(".json"));
  if (!out) throw IoError("cannot write manifest for " + path.string());
  out << doc.dump(2) << '\n';
}

double texel_coordinate(int i, int n) { return n == 1 ? 0.5 : static_cast<double>(i) / (n - 1); }

namespace {

struct AxisSample {
  int i0;
  int i1;
  double f;
};

AxisSample axis_sample(double t, int n) {
  if (n == 1) return {0, 0, 0.0};
  const double u = std::clamp(t, 0.0, 1.0) * (n - 1);
  const int i0 = std::min(static_cast<int>(u), n - 2);
  return {i0, i0 + 1, u - i0};
}

}  // namespace

void bilinear_sample(const ImageBuffer& img, double u, double v, std::span<float> out) {
  const auto sx = axis_sample(u, img.width);
  const auto sy = axis_sample(v, img.height);
  const double w00 = (1 - sx.f) * (1 - sy.f);
  const double w10 = sx.f * (1 - sy.f);
  const double w01 = (1 - sx.f) * sy.f;
  const double w11 = sx.f * sy.f;
  for (int c = 0; c < img.channels; ++c) {
    out[c] = static_cast<float>(w00 * img.at(sx.i0, sy.i0, c) + w10 * img.at(sx.i1, sy.i0, c) +
                                w01 * img.at(sx.i0, sy.i1, c) + w11 * img.at(sx.i1, sy.i1, c));
  }
}

std::vector<float> bilinear_sample(const ImageBuffer& img, double u, double v) {
  std::vector<float> out(static_cast<std::size_t>(img.channels));
  bilinear_sample(img, u, v, out);
  return out;
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height) {
  ImageBuffer out(width, height, img.channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      bilinear_sample(img, texel_coordinate(x, width), texel_coordinate(y, height),
                      std::span<float>(out.data).subspan((static_cast<std::size_t>(y) * width + x) * img.channels,
                                                         img.channels));
    }
  }
  return out;
}

ImageBuffer box_downsample(const ImageBuffer& img) {
  if (img.width % 2 != 0 || img.height % 2 != 0) throw ArgumentError("box downsample needs even dimensions");
  ImageBuffer out(img.width / 2, img.height / 2, img.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const double s = static_cast<double>(img.at(2 * x, 2 * y, c)) + img.at(2 * x + 1, 2 * y, c) +
                         img.at(2 * x, 2 * y + 1, c) + img.at(2 * x + 1, 2 * y + 1, c);
        out.at(x, y, c) = static_cast<float>(s / 4.0);
      }
    }
  }
  return out;
}

double mse(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    throw ArgumentError("image shapes differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.data.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / m);
}

void stratum_sample(int x, int y, int width, int height, Rng& rng, float& u, float& v) {
  auto jitter = [&rng](int i, int n) {
    float t = static_cast<float>((i + uniform01(rng)) / n);
    // keep the float inside [i/n, (i+1)/n) despite rounding
    while (static_cast<double>(t) * n >= i + 1) t = std::nextafter(t, 0.0f);
    while (static_cast<double>(t) * n < i) t = std::nextafter(t, 1.0f);
    return t;
  };
  u = jitter(x, width);
  v = jitter(y, height);
}

std::vector<float> stratified_uv_batch(int width, int height, Rng& rng) {
  std::vector<float> uv(2 * static_cast<std::size_t>(width) * height);
  std::size_t k = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      stratum_sample(x, y, width, height, rng, uv[k], uv[k + 1]);
      k += 2;
    }
  }
  return uv;
}

StratifiedSampler::StratifiedSampler(int width, int height)
    : width_(width), height_(height), order_(static_cast<std::size_t>(width) * height) {
  std::iota(order_.begin(), order_.end(), 0u);
  cursor_ = order_.size();
}

void StratifiedSampler::draw(std::size_t count, Rng& rng, std::span<float> uv) {
  for (std::size_t i = 0; i < count; ++i) {
    if (cursor_ == order_.size()) {
      // Fisher-Yates with uniform01 so the order does not depend on the
      // standard library's distribution implementation.
      for (std::size_t j = order_.size(); j > 1; --j) {
        const auto r = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(j));
        std::swap(order_[j - 1], order_[r]);
      }
      cursor_ = 0;
    }
    const std::uint32_t s = order_[cursor_++];
    stratum_sample(static_cast<int>(s % width_), static_cast<int>(s / width_), width_, height_, rng, uv[2 * i],
                   uv[2 * i + 1]);
  }
}

}  // namespace din
