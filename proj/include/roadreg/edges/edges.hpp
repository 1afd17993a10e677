// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// 2D edge extraction (built-in Canny-style detector or externally produced
// segmentation masks), lifting of rendered-view edges to 3D through the
// per-pixel correspondence map, and arc-length sampling of the 3D chains.

#ifndef ROADREG_EDGES_EDGES_HPP
#define ROADREG_EDGES_EDGES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <span>
#include <vector>

#include "roadreg/core/camera.hpp"
#include "roadreg/edges/kdtree.hpp"
#include "roadreg/io/artifacts.hpp"
#include "roadreg/io/image.hpp"
#include "roadreg/render/neighbor_render.hpp"

namespace roadreg {

/// Edge pixels grouped into ordered chains. `pixels[i]` belongs to chain
/// `chain_ids[i]`; chains are contiguous and stored in path order. Positions
/// may carry a sub-pixel offset (at most half a pixel) from their grid cell.
struct EdgeSet2D {
  int width = 0;
  int height = 0;
  std::vector<Vec2> pixels;
  std::vector<int> chain_ids;

  [[nodiscard]] std::size_t size() const { return pixels.size(); }
  [[nodiscard]] bool empty() const { return pixels.empty(); }
};

/// World-frame edge points with their chain id. After lifting,
/// `source_pixels` holds the rendered-view pixel each point came from.
struct EdgeSet3D {
  std::vector<Vec3> points;
  std::vector<int> chain_ids;
  std::vector<Vec2> source_pixels;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
};

enum class EdgeBackend { Builtin, MaskFile };

struct EdgeParams {
  double sigma = 1.4;
  double high_percentile = 92.0;
  double low_percentile = 80.0;
  bool subpixel = true;
  double depth_gap = 0.5;  // [m] chain split threshold when lifting
  double spacing = 0.2;    // [m] 3D sampling step

  void validate() const {
    if (!(sigma > 0)) fail(ErrorCode::ConfigError, "edges", "sigma must be positive");
    if (!(low_percentile >= 0 && low_percentile <= high_percentile && high_percentile <= 100)) {
      fail(ErrorCode::ConfigError, "edges", "need 0 <= low <= high <= 100 percentiles");
    }
    if (!(depth_gap > 0) || !(spacing > 0)) {
      fail(ErrorCode::ConfigError, "edges", "depth_gap and spacing must be positive");
    }
  }
};

namespace detail {

struct Gradients {
  ImageGray gx, gy, mag;
};

inline Gradients sobel(const ImageGray& s) {
  Gradients g{ImageGray(s.width, s.height), ImageGray(s.width, s.height),
              ImageGray(s.width, s.height)};
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const double a = s.clamped(x - 1, y - 1), b = s.clamped(x, y - 1), c = s.clamped(x + 1, y - 1);
      const double d = s.clamped(x - 1, y), f = s.clamped(x + 1, y);
      const double gg = s.clamped(x - 1, y + 1), h = s.clamped(x, y + 1), i = s.clamped(x + 1, y + 1);
      const double gx = (c + 2 * f + i) - (a + 2 * d + gg);
      const double gy = (gg + 2 * h + i) - (a + 2 * b + c);
      g.gx.at(x, y) = gx;
      g.gy.at(x, y) = gy;
      g.mag.at(x, y) = std::hypot(gx, gy);
    }
  }
  return g;
}

inline double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  const auto idx = static_cast<std::size_t>(
      std::floor(std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
  return values[idx];
}

// Gradient direction quantized to 0, 45, 90, 135 degrees.
inline constexpr std::array<std::array<int, 2>, 4> kDirSteps{{{1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

inline int direction_bin(double gx, double gy) {
  double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
  if (angle < 0) angle += 180.0;
  if (angle < 22.5 || angle >= 157.5) return 0;
  if (angle < 67.5) return 1;
  if (angle < 112.5) return 2;
  return 3;
}

/// Orders a binary pixel map into chains by walking 8-connected paths,
/// starting from endpoints (then from leftover loops) in raster order.
inline void trace_chains(const std::vector<std::uint8_t>& on, const std::vector<Vec2>& position,
                         int width, int height, EdgeSet2D& out) {
  static constexpr std::array<std::array<int, 2>, 8> kNbr{
      {{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {1, 1}, {-1, 1}, {-1, -1}, {1, -1}}};
  std::vector<std::uint8_t> visited(on.size(), 0);
  auto is_on = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height &&
           on[static_cast<std::size_t>(y) * width + x];
  };
  auto degree = [&](int x, int y) {
    int n = 0;
    for (const auto& d : kNbr) n += is_on(x + d[0], y + d[1]) ? 1 : 0;
    return n;
  };
  int chain = 0;
  auto walk = [&](int x, int y) {
    while (true) {
      const std::size_t idx = static_cast<std::size_t>(y) * width + x;
      visited[idx] = 1;
      out.pixels.push_back(position[idx]);
      out.chain_ids.push_back(chain);
      bool moved = false;
      for (const auto& d : kNbr) {
        const int nx = x + d[0], ny = y + d[1];
        if (is_on(nx, ny) && !visited[static_cast<std::size_t>(ny) * width + nx]) {
          x = nx;
          y = ny;
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    ++chain;
  };
  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * width + x;
        if (!on[idx] || visited[idx]) continue;
        if (pass == 0 && degree(x, y) > 1) continue;
        walk(x, y);
      }
    }
  }
}

}  // namespace detail

/// Canny-style detector with hysteresis thresholds taken as percentiles of the
/// gradient-magnitude distribution, so the output does not change under
/// v -> a v + b (a > 0).
[[nodiscard]] inline EdgeSet2D extract_edges_builtin(const ImageGray& image,
                                                     const EdgeParams& params = {}) {
  params.validate();
  EdgeSet2D out;
  out.width = image.width;
  out.height = image.height;
  if (image.empty()) return out;
  const ImageGray smooth = gaussian_blur(image, params.sigma);
  const detail::Gradients g = detail::sobel(smooth);
  const double max_mag = *std::max_element(g.mag.pixels.begin(), g.mag.pixels.end());
  if (!(max_mag > 1e-9)) return out;
  // relative tolerance for tie comparisons and a floor against round-off noise
  const double eps = 1e-9 * max_mag;
  const double floor = 1e-3 * max_mag;

  const int w = image.width, h = image.height;
  std::vector<std::uint8_t> nms(g.mag.pixels.size(), 0);
  std::vector<std::int8_t> dir(g.mag.pixels.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = g.mag.at(x, y);
      if (m <= floor) continue;
      const int bin = detail::direction_bin(g.gx.at(x, y), g.gy.at(x, y));
      const auto& s = detail::kDirSteps[bin];
      const double fwd = g.mag.clamped(x + s[0], y + s[1]);
      const double bwd = g.mag.clamped(x - s[0], y - s[1]);
      // strict on one side so plateaus of two equal pixels keep only one
      if (m > fwd + eps && m >= bwd - eps) {
        const std::size_t idx = static_cast<std::size_t>(y) * w + x;
        nms[idx] = 1;
        dir[idx] = static_cast<std::int8_t>(bin);
      }
    }
  }

  const double high = std::max(detail::percentile(g.mag.pixels, params.high_percentile), floor);
  const double low = std::max(detail::percentile(g.mag.pixels, params.low_percentile), floor);
  std::vector<std::uint8_t> on(nms.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < nms.size(); ++i) {
    if (nms[i] && g.mag.pixels[i] >= high - eps) {
      on[i] = 1;
      queue.push_back(i);
    }
  }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
        if (!on[j] && nms[j] && g.mag.pixels[j] >= low - eps) {
          on[j] = 1;
          queue.push_back(j);
        }
      }
    }
  }

  std::vector<Vec2> position(on.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!on[idx]) continue;
      Vec2 p(x, y);
      if (params.subpixel) {
        // parabola through the magnitudes along the quantized gradient direction
        const auto& s = detail::kDirSteps[dir[idx]];
        const double m0 = g.mag.at(x, y);
        const double mf = g.mag.clamped(x + s[0], y + s[1]);
        const double mb = g.mag.clamped(x - s[0], y - s[1]);
        const double denom = mb - 2 * m0 + mf;
        if (denom < -eps) {
          const double off = std::clamp(0.5 * (mb - mf) / denom, -0.5, 0.5);
          const Vec2 step(s[0], s[1]);
          // keep the point inside its own cell (diagonal steps are longer)
          p += off * step / step.lpNorm<Eigen::Infinity>();
        }
      }
      position[idx] = p;
    }
  }
  detail::trace_chains(on, position, w, h, out);
  return out;
}

/// Boundary pixels of a binary mask: mask pixels with at least one 4-neighbor
/// that is zero or outside the image.
[[nodiscard]] inline EdgeSet2D extract_edges_from_mask(const EdgeMask& mask, int width,
                                                       int height) {
  if (mask.width != width || mask.height != height) {
    fail(ErrorCode::DimensionMismatch, "edges", "mask size differs from image size");
  }
  EdgeSet2D out;
  out.width = width;
  out.height = height;
  std::vector<std::uint8_t> on(mask.pixels.size(), 0);
  std::vector<Vec2> position(mask.pixels.size());
  auto get = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height && mask.at(x, y);
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!mask.at(x, y)) continue;
      if (!get(x - 1, y) || !get(x + 1, y) || !get(x, y - 1) || !get(x, y + 1)) {
        const std::size_t idx = static_cast<std::size_t>(y) * width + x;
        on[idx] = 1;
        position[idx] = Vec2(x, y);
      }
    }
  }
  detail::trace_chains(on, position, width, height, out);
  return out;
}

/// Dispatches on the backend; `mask` is required for MaskFile.
[[nodiscard]] inline EdgeSet2D extract_edges_2d(const ImageGray& image, EdgeBackend backend,
                                                const EdgeMask* mask = nullptr,
                                                const EdgeParams& params = {}) {
  if (backend == EdgeBackend::Builtin) return extract_edges_builtin(image, params);
  if (!mask) fail(ErrorCode::BackendUnavailable, "edges", "mask backend needs a mask file");
  return extract_edges_from_mask(*mask, image.width, image.height);
}

/// Looks up the world point behind each edge pixel. Sub-pixel positions are
/// bilinearly interpolated from the surrounding shaded pixels; positions over
/// holes, or whose interpolated point does not reproject within half a pixel,
/// are dropped. Chains are split where consecutive points jump by more than
/// `depth_gap` meters, then renumbered from 0.
[[nodiscard]] inline EdgeSet3D lift_edges_3d(const EdgeSet2D& edges, const RenderedView& view,
                                             double depth_gap = 0.5) {
  EdgeSet3D out;
  int next_chain = -1;
  int prev_source = -1;
  Vec3 prev_point = Vec3::Zero();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Vec2& px = edges.pixels[i];
    const int x0 = static_cast<int>(std::floor(px.x()));
    const int y0 = static_cast<int>(std::floor(px.y()));
    const double ax = px.x() - x0, ay = px.y() - y0;
    Vec3 acc = Vec3::Zero();
    double wsum = 0;
    bool ok = true;
    Vec3 corner_min = Vec3::Constant(1e300), corner_max = Vec3::Constant(-1e300);
    for (int dy = 0; dy <= 1 && ok; ++dy) {
      for (int dx = 0; dx <= 1 && ok; ++dx) {
        const double wgt = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
        if (wgt <= 1e-12) continue;
        if (!view.has(x0 + dx, y0 + dy)) {
          ok = false;
          break;
        }
        const Vec3& p = view.point(x0 + dx, y0 + dy);
        acc += wgt * p;
        wsum += wgt;
        corner_min = corner_min.cwiseMin(p);
        corner_max = corner_max.cwiseMax(p);
      }
    }
    if (!ok || wsum <= 0) continue;
    if ((corner_max - corner_min).norm() > depth_gap) continue;
    const Vec3 point = acc / wsum;
    const auto proj = try_project(view.intrinsics, view.pose, point);
    if (!proj || (proj->pixel - px).norm() > 0.5) continue;

    const bool new_chain = prev_source != edges.chain_ids[i] || out.empty() ||
                           (point - prev_point).norm() > depth_gap;
    if (new_chain) ++next_chain;
    prev_source = edges.chain_ids[i];
    prev_point = point;
    out.points.push_back(point);
    out.chain_ids.push_back(next_chain);
    out.source_pixels.push_back(px);
  }
  return out;
}

/// Resamples each chain at `spacing` meters of arc length, starting at the
/// first point and keeping the chain end. Chains shorter than `spacing`
/// contribute their arc-length midpoint.
[[nodiscard]] inline EdgeSet3D sample_edge_points(const EdgeSet3D& dense, double spacing) {
  if (!(spacing > 0)) fail(ErrorCode::ConfigError, "edges", "spacing must be positive");
  EdgeSet3D out;
  std::size_t begin = 0;
  while (begin < dense.size()) {
    std::size_t end = begin;
    while (end < dense.size() && dense.chain_ids[end] == dense.chain_ids[begin]) ++end;
    const int chain = dense.chain_ids[begin];

    std::vector<double> cum(end - begin, 0.0);
    for (std::size_t i = begin + 1; i < end; ++i) {
      cum[i - begin] = cum[i - begin - 1] + (dense.points[i] - dense.points[i - 1]).norm();
    }
    const double length = cum.back();
    auto point_at = [&](double s) {
      auto it = std::lower_bound(cum.begin(), cum.end(), s);
      std::size_t j = static_cast<std::size_t>(it - cum.begin());
      if (j == 0) return dense.points[begin];
      if (j >= cum.size()) return dense.points[end - 1];
      const double seg = cum[j] - cum[j - 1];
      const double a = seg > 0 ? (s - cum[j - 1]) / seg : 0.0;
      return Vec3((1 - a) * dense.points[begin + j - 1] + a * dense.points[begin + j]);
    };
    auto emit = [&](const Vec3& p) {
      out.points.push_back(p);
      out.chain_ids.push_back(chain);
    };
    if (length < spacing) {
      emit(point_at(0.5 * length));
    } else {
      const auto steps = static_cast<std::size_t>(std::floor(length / spacing + 1e-9));
      for (std::size_t k = 0; k <= steps; ++k) emit(point_at(static_cast<double>(k) * spacing));
      if (length - static_cast<double>(steps) * spacing > 1e-9) emit(dense.points[end - 1]);
    }
    begin = end;
  }
  return out;
}

/// k-d tree over camera-image edge pixels.
class EdgeIndex {
 public:
  explicit EdgeIndex(const EdgeSet2D& edges) : tree_(edges.pixels) {
    if (edges.empty()) fail(ErrorCode::EmptyEdgeSet, "edges", "no edge pixels to index");
  }

  [[nodiscard]] std::vector<Neighbor> knn(const Vec2& query, std::size_t k) const {
    return tree_.knn(query, k);
  }
  [[nodiscard]] const Vec2& pixel(std::size_t i) const { return tree_.point(i); }
  [[nodiscard]] std::size_t size() const { return tree_.size(); }

 private:
  KdTree2D tree_;
};

[[nodiscard]] inline EdgeIndex build_edge_index(const EdgeSet2D& edges) {
  return EdgeIndex(edges);
}

}  // namespace roadreg

#endif  // ROADREG_EDGES_EDGES_HPP
