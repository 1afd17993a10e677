// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Grayscale image container plus PGM/PPM/PNG readers and writers.

#ifndef ROADREG_IO_IMAGE_HPP
#define ROADREG_IO_IMAGE_HPP

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#ifdef ROADREG_HAVE_PNG
#include <png.h>
#endif

#include "roadreg/core/types.hpp"

namespace roadreg {

/// Row-major grayscale image with values in [0,1].
struct ImageGray {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  ImageGray() = default;
  ImageGray(int w, int h, double fill = 0.0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  [[nodiscard]] double& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] double at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] bool empty() const { return pixels.empty(); }
  [[nodiscard]] bool in_bounds(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  /// Clamped-border access.
  [[nodiscard]] double clamped(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return at(x, y);
  }
  /// Bilinear sample with clamped borders.
  [[nodiscard]] double bilinear(double x, double y) const {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double ax = x - x0;
    const double ay = y - y0;
    return (1 - ay) * ((1 - ax) * clamped(x0, y0) + ax * clamped(x0 + 1, y0)) +
           ay * ((1 - ax) * clamped(x0, y0 + 1) + ax * clamped(x0 + 1, y0 + 1));
  }
};

/// 8-bit RGB image used for overlays.
[[nodiscard]] inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with clamped borders.
[[nodiscard]] inline ImageGray gaussian_blur(const ImageGray& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  ImageGray tmp(img.width, img.height), out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * img.clamped(x + i, y);
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.clamped(x, y + i);
      out.at(x, y) = s;
    }
  }
  return out;
}

struct ImageRgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::array<std::uint8_t, 3>> pixels;

  static ImageRgb8 from_gray(const ImageGray& g) {
    ImageRgb8 out{g.width, g.height, {}};
    out.pixels.resize(g.pixels.size());
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
      const auto v = static_cast<std::uint8_t>(
          std::lround(std::clamp(g.pixels[i], 0.0, 1.0) * 255.0));
      out.pixels[i] = {v, v, v};
    }
    return out;
  }
  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x >= 0 && y >= 0 && x < width && y < height) {
      pixels[static_cast<std::size_t>(y) * width + x] = c;
    }
  }
};

enum class ImageFormat { Pgm, Ppm, Png, Auto };

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path,
                                                 std::string_view module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, module, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Minimal tokenizer over a PNM header (handles '#' comments).
class PnmReader {
 public:
  explicit PnmReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::string token() {
    skip_space_and_comments();
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) {
      out.push_back(static_cast<char>(bytes_[pos_++]));
    }
    if (out.empty()) fail(ErrorCode::ParseError, "pcio", "truncated PNM header");
    return out;
  }

  long integer() {
    const std::string t = token();
    try {
      std::size_t used = 0;
      const long v = std::stol(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::ParseError, "pcio", "bad integer in PNM: " + t);
    }
  }

  /// Consumes the single whitespace byte separating header and raster.
  void end_header() {
    if (pos_ >= bytes_.size()) fail(ErrorCode::ParseError, "pcio", "truncated PNM");
    ++pos_;
  }

  [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint8_t byte() { return bytes_[pos_++]; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

/// Reads PNM channels (1 or 3) scaled to [0,1].
inline std::vector<double> read_pnm(const std::vector<std::uint8_t>& bytes, int& width,
                                    int& height, int& channels) {
  PnmReader r(bytes);
  const std::string magic = r.token();
  bool binary = false;
  if (magic == "P2" || magic == "P5") {
    channels = 1;
    binary = magic == "P5";
  } else if (magic == "P3" || magic == "P6") {
    channels = 3;
    binary = magic == "P6";
  } else {
    fail(ErrorCode::ParseError, "pcio", "unsupported PNM magic " + magic);
  }
  const long w = r.integer();
  const long h = r.integer();
  const long maxval = r.integer();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    fail(ErrorCode::ParseError, "pcio", "invalid PNM dimensions or maxval");
  }
  width = static_cast<int>(w);
  height = static_cast<int>(h);
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  std::vector<double> values(count);
  const double scale = 1.0 / static_cast<double>(maxval);
  if (binary) {
    r.end_header();
    const std::size_t bpv = maxval < 256 ? 1 : 2;
    if (r.remaining() < count * bpv) {
      fail(ErrorCode::ParseError, "pcio", "truncated PNM raster");
    }
    for (std::size_t i = 0; i < count; ++i) {
      unsigned v = r.byte();
      if (bpv == 2) v = (v << 8) | r.byte();
      values[i] = std::min(1.0, v * scale);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const long v = r.integer();
      if (v < 0 || v > maxval) fail(ErrorCode::ParseError, "pcio", "PNM value out of range");
      values[i] = static_cast<double>(v) * scale;
    }
  }
  return values;
}

inline ImageFormat format_from_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return ImageFormat::Png;
  if (ext == ".ppm") return ImageFormat::Ppm;
  return ImageFormat::Pgm;
}

}  // namespace detail

/// Loads an image as grayscale in [0,1]. RGB inputs use luma
/// 0.299 R + 0.587 G + 0.114 B.
[[nodiscard]] inline ImageGray load_image(const std::filesystem::path& path,
                                          ImageFormat format = ImageFormat::Auto) {
  if (format == ImageFormat::Auto) format = detail::format_from_extension(path);
  if (format == ImageFormat::Png) {
#ifdef ROADREG_HAVE_PNG
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
      fail(ErrorCode::ParseError, "pcio", "cannot read PNG " + path.string());
    }
    img.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
      png_image_free(&img);
      fail(ErrorCode::ParseError, "pcio", "corrupt PNG " + path.string());
    }
    ImageGray out(static_cast<int>(img.width), static_cast<int>(img.height));
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
      out.pixels[i] = luma(buffer[3 * i] / 255.0, buffer[3 * i + 1] / 255.0,
                           buffer[3 * i + 2] / 255.0);
    }
    return out;
#else
    fail(ErrorCode::BackendUnavailable, "pcio", "built without PNG support");
#endif
  }
  const auto bytes = detail::read_file_bytes(path, "pcio");
  int w = 0, h = 0, c = 0;
  const auto values = detail::read_pnm(bytes, w, h, c);
  ImageGray out(w, h);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = c == 1 ? values[i]
                           : luma(values[3 * i], values[3 * i + 1], values[3 * i + 2]);
  }
  return out;
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

/// Binary PGM, maxval 255.
inline void save_pgm(const std::filesystem::path& path, const ImageGray& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "pcio", "cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<char> raster(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    raster[i] = static_cast<char>(to_byte(img.pixels[i]));
  }
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
}

/// Binary PPM, maxval 255.
inline void save_ppm(const std::filesystem::path& path, const ImageRgb8& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "pcio", "cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  for (const auto& px : img.pixels) {
    out.write(reinterpret_cast<const char*>(px.data()), 3);
  }
}

}  // namespace roadreg

#endif  // ROADREG_IO_IMAGE_HPP
