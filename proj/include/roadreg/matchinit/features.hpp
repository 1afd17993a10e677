// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Built-in feature matcher: Shi-Tomasi corners over a half-octave pyramid,
// 4x4x8 gradient-orientation descriptors, mutual nearest neighbors with a
// ratio test. Descriptors are not rotation-normalized; the views being
// compared share (near) zero roll.

#ifndef ROADREG_MATCHINIT_FEATURES_HPP
#define ROADREG_MATCHINIT_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "roadreg/core/parallel.hpp"
#include "roadreg/io/artifacts.hpp"
#include "roadreg/io/image.hpp"

namespace roadreg {

struct FeatureParams {
  int levels = 4;
  double level_scale = std::numbers::sqrt2;
  double quality = 0.01;        // corner response relative to the level maximum
  int nms_radius = 3;
  int cell_size = 32;           // bucketing cell, level pixels
  int per_cell = 3;
  int max_per_level = 1500;
  double ratio = 0.8;
  double duplicate_radius = 3.0;  // px; second-best candidates closer than this are the same corner
  int workers = 1;

  void validate() const {
    if (levels < 1 || !(level_scale > 1.0) || !(quality > 0) || nms_radius < 1 ||
        cell_size < 4 || per_cell < 1 || max_per_level < 1 || !(ratio > 0 && ratio <= 1)) {
      fail(ErrorCode::ConfigError, "matchinit", "invalid feature parameters");
    }
  }
};

inline constexpr int kDescriptorSize = 128;

struct Keypoint {
  Vec2 pixel;      // level-0 coordinates
  int level = 0;
  double response = 0.0;
};

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<float> descriptors;  // kDescriptorSize per keypoint

  [[nodiscard]] std::size_t size() const { return keypoints.size(); }
  [[nodiscard]] const float* descriptor(std::size_t i) const {
    return descriptors.data() + i * kDescriptorSize;
  }
};

namespace detail {

struct PyramidLevel {
  double scale = 1.0;
  ImageGray image, gx, gy;
};

inline ImageGray downsample(const ImageGray& src, double scale) {
  const int w = std::max(1, static_cast<int>(std::floor((src.width - 1) / scale)) + 1);
  const int h = std::max(1, static_cast<int>(std::floor((src.height - 1) / scale)) + 1);
  ImageGray out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y) = src.bilinear(x * scale, y * scale);
  return out;
}

inline void central_gradients(const ImageGray& img, ImageGray& gx, ImageGray& gy) {
  gx = ImageGray(img.width, img.height);
  gy = ImageGray(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      gx.at(x, y) = 0.5 * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
      gy.at(x, y) = 0.5 * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
    }
  }
}

inline std::vector<PyramidLevel> build_pyramid(const ImageGray& image, const FeatureParams& p) {
  std::vector<PyramidLevel> levels;
  for (int l = 0; l < p.levels; ++l) {
    const double scale = std::pow(p.level_scale, l);
    PyramidLevel lv;
    lv.scale = scale;
    const ImageGray blurred = gaussian_blur(image, 0.8 * scale);
    lv.image = l == 0 ? blurred : downsample(blurred, scale);
    if (lv.image.width < 24 || lv.image.height < 24) break;
    central_gradients(lv.image, lv.gx, lv.gy);
    levels.push_back(std::move(lv));
  }
  return levels;
}

inline double parabola_offset(double left, double mid, double right) {
  const double denom = left - 2.0 * mid + right;
  if (!(denom < 0)) return 0.0;
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

inline constexpr int kPatchRadius = 8;

inline bool describe(const PyramidLevel& lv, const Vec2& pos, float* out) {
  double hist[kDescriptorSize] = {};
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  for (int j = 0; j < 16; ++j) {
    for (int i = 0; i < 16; ++i) {
      const double ox = i - 7.5, oy = j - 7.5;
      const double gx = lv.gx.bilinear(pos.x() + ox, pos.y() + oy);
      const double gy = lv.gy.bilinear(pos.x() + ox, pos.y() + oy);
      const double mag = std::hypot(gx, gy) * std::exp(-(ox * ox + oy * oy) / 128.0);
      if (mag <= 0) continue;
      double angle = std::atan2(gy, gx);
      if (angle < 0) angle += kTwoPi;
      const double bin = angle / kTwoPi * 8.0;
      const int b0 = static_cast<int>(std::floor(bin)) % 8;
      const double frac = bin - std::floor(bin);
      const int cell = (j / 4) * 4 + (i / 4);
      hist[cell * 8 + b0] += mag * (1.0 - frac);
      hist[cell * 8 + (b0 + 1) % 8] += mag * frac;
    }
  }
  auto normalize = [&] {
    double n = 0;
    for (double v : hist) n += v * v;
    n = std::sqrt(n);
    if (n < 1e-12) return false;
    for (double& v : hist) v /= n;
    return true;
  };
  if (!normalize()) return false;
  for (double& v : hist) v = std::min(v, 0.2);
  if (!normalize()) return false;
  for (int k = 0; k < kDescriptorSize; ++k) out[k] = static_cast<float>(hist[k]);
  return true;
}

inline void detect_level(const PyramidLevel& lv, int level, const FeatureParams& p,
                         FeatureSet& out) {
  const int w = lv.image.width, h = lv.image.height;
  ImageGray xx(w, h), yy(w, h), xy(w, h);
  for (std::size_t i = 0; i < xx.pixels.size(); ++i) {
    const double gx = lv.gx.pixels[i], gy = lv.gy.pixels[i];
    xx.pixels[i] = gx * gx;
    yy.pixels[i] = gy * gy;
    xy.pixels[i] = gx * gy;
  }
  xx = gaussian_blur(xx, 1.5);
  yy = gaussian_blur(yy, 1.5);
  xy = gaussian_blur(xy, 1.5);
  ImageGray resp(w, h);
  double max_resp = 0;
  for (std::size_t i = 0; i < resp.pixels.size(); ++i) {
    const double a = xx.pixels[i], c = yy.pixels[i], b = xy.pixels[i];
    resp.pixels[i] = 0.5 * (a + c) - std::sqrt(0.25 * (a - c) * (a - c) + b * b);
    max_resp = std::max(max_resp, resp.pixels[i]);
  }
  if (!(max_resp > 1e-14)) return;
  const double threshold = p.quality * max_resp;

  struct Candidate {
    int x, y;
    double r;
  };
  const int border = kPatchRadius + 1;
  const int cells_x = (w + p.cell_size - 1) / p.cell_size;
  const int cells_y = (h + p.cell_size - 1) / p.cell_size;
  std::vector<std::vector<Candidate>> cells(static_cast<std::size_t>(cells_x) * cells_y);
  for (int y = border; y < h - border; ++y) {
    for (int x = border; x < w - border; ++x) {
      const double r = resp.at(x, y);
      if (r <= threshold) continue;
      bool is_max = true;
      for (int dy = -p.nms_radius; dy <= p.nms_radius && is_max; ++dy) {
        for (int dx = -p.nms_radius; dx <= p.nms_radius; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double o = resp.clamped(x + dx, y + dy);
          // ties resolved in raster order so plateaus yield one corner
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (o > r || (earlier && o == r)) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cells[(y / p.cell_size) * cells_x + x / p.cell_size].push_back({x, y, r});
    }
  }
  auto stronger = [](const Candidate& a, const Candidate& b) {
    if (a.r != b.r) return a.r > b.r;
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  };
  std::vector<Candidate> kept;
  for (auto& cell : cells) {
    std::sort(cell.begin(), cell.end(), stronger);
    if (static_cast<int>(cell.size()) > p.per_cell) cell.resize(p.per_cell);
    kept.insert(kept.end(), cell.begin(), cell.end());
  }
  std::sort(kept.begin(), kept.end(), stronger);
  if (static_cast<int>(kept.size()) > p.max_per_level) kept.resize(p.max_per_level);

  float desc[kDescriptorSize];
  for (const Candidate& c : kept) {
    const Vec2 pos(c.x + parabola_offset(resp.at(c.x - 1, c.y), c.r, resp.at(c.x + 1, c.y)),
                   c.y + parabola_offset(resp.at(c.x, c.y - 1), c.r, resp.at(c.x, c.y + 1)));
    if (!describe(lv, pos, desc)) continue;
    out.keypoints.push_back({pos * lv.scale, level, c.r});
    out.descriptors.insert(out.descriptors.end(), desc, desc + kDescriptorSize);
  }
}

inline float descriptor_dist2(const float* a, const float* b) {
  float s = 0;
  for (int k = 0; k < kDescriptorSize; ++k) {
    const float d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

struct BestMatch {
  std::ptrdiff_t best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  double second_d2 = std::numeric_limits<double>::infinity();
};

inline constexpr std::size_t kShortlist = 8;

inline std::vector<BestMatch> nearest_descriptors(const FeatureSet& from, const FeatureSet& to,
                                                  double duplicate_radius, int workers) {
  std::vector<BestMatch> out(from.size());
  parallel_for(from.size(), workers, [&](std::size_t i) {
    // shortlist of the closest candidates, ascending by (distance, index)
    std::array<std::pair<float, std::size_t>, kShortlist> top;
    std::size_t count = 0;
    const float* d = from.descriptor(i);
    for (std::size_t j = 0; j < to.size(); ++j) {
      const float d2 = descriptor_dist2(d, to.descriptor(j));
      if (count == kShortlist && !(d2 < top[kShortlist - 1].first)) continue;
      std::size_t pos = std::min(count, kShortlist - 1);
      while (pos > 0 && top[pos - 1].first > d2) {
        top[pos] = top[pos - 1];
        --pos;
      }
      top[pos] = {d2, j};
      count = std::min(count + 1, kShortlist);
    }
    BestMatch m;
    if (count > 0) {
      m.best = static_cast<std::ptrdiff_t>(top[0].second);
      m.best_d2 = top[0].first;
      const Vec2& anchor = to.keypoints[top[0].second].pixel;
      for (std::size_t r = 1; r < count; ++r) {
        if ((to.keypoints[top[r].second].pixel - anchor).norm() > duplicate_radius) {
          m.second_d2 = top[r].first;
          break;
        }
      }
    }
    out[i] = m;
  });
  return out;
}

}  // namespace detail

/// Corners and descriptors over all pyramid levels, ordered by level then
/// response.
[[nodiscard]] inline FeatureSet detect_features(const ImageGray& image,
                                                const FeatureParams& params = {}) {
  params.validate();
  FeatureSet out;
  if (image.empty()) return out;
  const auto pyramid = detail::build_pyramid(image, params);
  for (std::size_t l = 0; l < pyramid.size(); ++l) {
    detail::detect_level(pyramid[l], static_cast<int>(l), params, out);
  }
  return out;
}

/// Mutual nearest neighbors passing the ratio test. The second-best distance
/// ignores candidates within `duplicate_radius` of the best one, since a
/// corner is usually detected on several pyramid levels.
[[nodiscard]] inline MatchList match_feature_sets(const FeatureSet& a, const FeatureSet& b,
                                                  const FeatureParams& params = {}) {
  MatchList out;
  if (a.size() == 0 || b.size() == 0) return out;
  const auto ab = detail::nearest_descriptors(a, b, params.duplicate_radius, params.workers);
  const auto ba = detail::nearest_descriptors(b, a, params.duplicate_radius, params.workers);
  const double ratio2 = params.ratio * params.ratio;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& m = ab[i];
    if (m.best < 0) continue;
    if (ba[static_cast<std::size_t>(m.best)].best != static_cast<std::ptrdiff_t>(i)) continue;
    if (!(m.best_d2 < ratio2 * m.second_d2)) continue;
    out.push_back({a.keypoints[i].pixel, b.keypoints[static_cast<std::size_t>(m.best)].pixel});
  }
  return out;
}

[[nodiscard]] inline MatchList match_builtin(const ImageGray& image_a, const ImageGray& image_b,
                                             const FeatureParams& params = {}) {
  return match_feature_sets(detect_features(image_a, params), detect_features(image_b, params),
                            params);
}

}  // namespace roadreg

#endif  // ROADREG_MATCHINIT_FEATURES_HPP
