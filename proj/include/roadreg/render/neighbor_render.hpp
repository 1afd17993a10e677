// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Neighbor rendering: synthesizes a grayscale view of a point cloud while
// keeping, for every shaded pixel, the 3D world point it depicts.
//
//   1. z-buffer projection reorganizes the cloud into per-pixel slots
//   2. per pixel, slots in a window around it are gathered
//   3. a distance filter keeps the foreground points
//   4. a plane fitted to the foreground is intersected with the pixel ray
//   5. appearance is a weighted mean favouring near-foreground points close
//      to the intersection

#ifndef ROADREG_RENDER_NEIGHBOR_RENDER_HPP
#define ROADREG_RENDER_NEIGHBOR_RENDER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "roadreg/core/camera.hpp"
#include "roadreg/core/parallel.hpp"
#include "roadreg/core/types.hpp"
#include "roadreg/io/image.hpp"

namespace roadreg {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct RenderParams {
  int window = 5;          // odd, >= 3
  double xi = 0.1;         // foreground threshold [m]
  int min_foreground = 3;  // points needed for a plane fit
  int workers = 1;

  void validate() const {
    if (window < 3 || window % 2 == 0) {
      fail(ErrorCode::ConfigError, "render", "window must be odd and >= 3");
    }
    if (!(xi > 0)) fail(ErrorCode::ConfigError, "render", "xi must be positive");
    if (min_foreground < 1) {
      fail(ErrorCode::ConfigError, "render", "min_foreground must be >= 1");
    }
  }
};

/// z-buffer winner of one pixel.
struct Slot {
  std::int64_t index = -1;  // -1: empty
  double depth = 0.0;
  Vec3 point_cam = Vec3::Zero();
  double value = 0.0;

  [[nodiscard]] bool occupied() const { return index >= 0; }
};

struct ReorganizedCloud {
  int width = 0;
  int height = 0;
  std::vector<Slot> slots;

  [[nodiscard]] const Slot& at(int x, int y) const {
    return slots[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] std::size_t occupied_count() const {
    return static_cast<std::size_t>(
        std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.occupied(); }));
  }
};

struct NeighborPoint {
  std::int64_t index = -1;
  Vec3 point_cam;
  double value = 0.0;
  double distance = 0.0;  // Euclidean distance to the camera center
};

struct NeighborSet {
  int center_x = 0;
  int center_y = 0;
  std::vector<NeighborPoint> points;
  std::vector<std::uint8_t> flags;  // foreground flags, filled by filter_foreground

  [[nodiscard]] bool empty() const { return points.empty(); }
  [[nodiscard]] std::size_t size() const { return points.size(); }
};

/// Rendered grayscale view with per-pixel depth and world-frame
/// correspondence. A pixel is shaded iff `valid` is set.
struct RenderedView {
  ImageGray image;
  std::vector<double> depth;        // camera-frame z, 0 for holes
  std::vector<Vec3> correspondence;  // world frame
  std::vector<std::uint8_t> valid;
  PoseSE3 pose;
  CameraIntrinsics intrinsics;

  [[nodiscard]] int width() const { return image.width; }
  [[nodiscard]] int height() const { return image.height; }
  [[nodiscard]] std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * image.width + x;
  }
  [[nodiscard]] bool has(int x, int y) const {
    return x >= 0 && y >= 0 && x < image.width && y < image.height && valid[index(x, y)];
  }
  [[nodiscard]] const Vec3& point(int x, int y) const { return correspondence[index(x, y)]; }
  [[nodiscard]] std::size_t shaded_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
  }
};

// ---------------------------------------------------------------------------
// Z-buffer
// ---------------------------------------------------------------------------

/// Projects every in-front, in-view point and keeps the nearest (by depth,
/// ties to the smaller index) per pixel. Concurrent writers resolve through
/// an atomic compare-and-swap on that total order, so the result does not
/// depend on the worker count.
[[nodiscard]] inline ReorganizedCloud project_zbuffer(const PointCloud& cloud,
                                                      const CameraIntrinsics& K,
                                                      const PoseSE3& T, int workers = 1) {
  ReorganizedCloud out;
  out.width = K.width;
  out.height = K.height;
  out.slots.resize(static_cast<std::size_t>(K.width) * K.height);
  const std::size_t n = cloud.size();
  if (n == 0) return out;

  std::vector<Vec3> cam(n);
  std::vector<std::int64_t> pixel_of(n, -1);
  parallel_for(n, workers, [&](std::size_t i) {
    cam[i] = T * cloud.points[i];
    const auto proj = project_camera_point(K, cam[i]);
    if (!proj) return;
    const double u = std::round(proj->pixel.x());
    const double v = std::round(proj->pixel.y());
    if (u < 0 || v < 0 || u >= K.width || v >= K.height) return;
    pixel_of[i] = static_cast<std::int64_t>(v) * K.width + static_cast<std::int64_t>(u);
  });

  // 0 = empty, otherwise point index + 1
  std::vector<std::atomic<std::uint64_t>> winner(out.slots.size());
  for (auto& w : winner) w.store(0, std::memory_order_relaxed);
  auto better = [&](std::uint64_t cand, std::uint64_t cur) {
    if (cur == 0) return true;
    const double dc = cam[cand - 1].z();
    const double du = cam[cur - 1].z();
    return dc < du || (dc == du && cand < cur);
  };
  parallel_for(n, workers, [&](std::size_t i) {
    if (pixel_of[i] < 0) return;
    auto& slot = winner[static_cast<std::size_t>(pixel_of[i])];
    const std::uint64_t cand = i + 1;
    std::uint64_t cur = slot.load(std::memory_order_relaxed);
    while (better(cand, cur)) {
      if (slot.compare_exchange_weak(cur, cand, std::memory_order_relaxed)) break;
    }
  });

  for (std::size_t p = 0; p < out.slots.size(); ++p) {
    const std::uint64_t w = winner[p].load(std::memory_order_relaxed);
    if (w == 0) continue;
    const std::size_t i = w - 1;
    Slot& s = out.slots[p];
    s.index = static_cast<std::int64_t>(i);
    s.point_cam = cam[i];
    s.depth = cam[i].z();
    s.value = cloud.gray(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-pixel steps
// ---------------------------------------------------------------------------

namespace detail {

inline void gather_into(const ReorganizedCloud& reorg, int x, int y, int window,
                        NeighborSet& out) {
  out.center_x = x;
  out.center_y = y;
  out.points.clear();
  out.flags.clear();
  const int r = window / 2;
  const int y0 = std::max(0, y - r), y1 = std::min(reorg.height - 1, y + r);
  const int x0 = std::max(0, x - r), x1 = std::min(reorg.width - 1, x + r);
  for (int yy = y0; yy <= y1; ++yy) {
    for (int xx = x0; xx <= x1; ++xx) {
      const Slot& s = reorg.at(xx, yy);
      if (!s.occupied()) continue;
      out.points.push_back({s.index, s.point_cam, s.value, s.point_cam.norm()});
    }
  }
}

inline double min_distance(const NeighborSet& q) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : q.points) m = std::min(m, p.distance);
  return m;
}

enum class PlaneFitStatus { Ok, TooFewPoints, Degenerate };

inline PlaneFitStatus fit_plane_impl(std::span<const Vec3> points, Plane& plane) {
  if (points.size() < 3) return PlaneFitStatus::TooFewPoints;
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) {
    const Vec3 d = p - centroid;
    cov.noalias() += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues();  // ascending
  const double largest = ev(2);
  if (!(largest > 0) || (ev(1) < 1e-12 * largest)) return PlaneFitStatus::Degenerate;
  plane.normal = eig.eigenvectors().col(0).normalized();
  plane.d = -plane.normal.dot(centroid);
  return PlaneFitStatus::Ok;
}

enum class IntersectStatus { Ok, Parallel, NegativeDepth };

inline IntersectStatus intersect_impl(const Ray& ray, const Plane& plane, Vec3& out) {
  const double denom = plane.normal.dot(ray.direction);
  if (std::abs(denom) <= 1e-9) return IntersectStatus::Parallel;
  const double s = -(plane.normal.dot(ray.origin) + plane.d) / denom;
  if (!(s > 0)) return IntersectStatus::NegativeDepth;
  out = ray.origin + s * ray.direction;
  return IntersectStatus::Ok;
}

}  // namespace detail

/// Collects occupied slots in the window x window block centered on the
/// pixel (center included, clipped at the borders), in row-major order.
[[nodiscard]] inline NeighborSet gather_neighbors(const ReorganizedCloud& reorg, int x, int y,
                                                  int window) {
  if (x < 0 || y < 0 || x >= reorg.width || y >= reorg.height) {
    fail(ErrorCode::BoundsError, "render", "pixel outside reorganized cloud");
  }
  if (window < 3 || window % 2 == 0) {
    fail(ErrorCode::ConfigError, "render", "window must be odd and >= 3");
  }
  NeighborSet out;
  detail::gather_into(reorg, x, y, window, out);
  return out;
}

/// f(P) = 1 iff d(P) - min d <= xi.
inline std::vector<std::uint8_t> filter_foreground(NeighborSet& q, double xi) {
  const double dmin = detail::min_distance(q);
  q.flags.resize(q.points.size());
  for (std::size_t j = 0; j < q.points.size(); ++j) {
    q.flags[j] = (q.points[j].distance - dmin <= xi) ? 1 : 0;
  }
  return q.flags;
}

/// Total-least-squares plane. Throws DegenerateGeometry for collinear (or
/// coincident) input.
[[nodiscard]] inline Plane fit_plane(std::span<const Vec3> points) {
  Plane plane;
  switch (detail::fit_plane_impl(points, plane)) {
    case detail::PlaneFitStatus::Ok: return plane;
    case detail::PlaneFitStatus::TooFewPoints:
      fail(ErrorCode::DegenerateGeometry, "render", "plane fit needs at least 3 points");
    case detail::PlaneFitStatus::Degenerate: break;
  }
  fail(ErrorCode::DegenerateGeometry, "render", "points are collinear");
}

[[nodiscard]] inline Vec3 intersect_ray_plane(const Ray& ray, const Plane& plane) {
  Vec3 out;
  switch (detail::intersect_impl(ray, plane, out)) {
    case detail::IntersectStatus::Ok: return out;
    case detail::IntersectStatus::Parallel:
      fail(ErrorCode::ParallelRay, "render", "ray is parallel to plane");
    case detail::IntersectStatus::NegativeDepth: break;
  }
  fail(ErrorCode::NegativeDepth, "render", "plane lies behind the camera along the ray");
}

/// Weighted mean of foreground appearance:
///   W_j = (xi + min d - d_j) / exp(|P_j - P_i|)
/// clamped to [0,1]. Requires flags from filter_foreground.
[[nodiscard]] inline double shade_pixel(const NeighborSet& q, const Vec3& intersection,
                                        double xi) {
  const double dmin = detail::min_distance(q);
  double num = 0.0, den = 0.0;
  double nearest_value = 0.0;
  double nearest_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < q.points.size(); ++j) {
    if (!q.flags.empty() && !q.flags[j]) continue;
    const auto& p = q.points[j];
    const double w = (xi + dmin - p.distance) / std::exp((p.point_cam - intersection).norm());
    num += w * p.value;
    den += w;
    if (p.distance < nearest_d) {
      nearest_d = p.distance;
      nearest_value = p.value;
    }
  }
  const double v = den > 0 ? num / den : nearest_value;
  return std::clamp(v, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Full view
// ---------------------------------------------------------------------------

namespace detail {

inline RenderedView empty_view(const CameraIntrinsics& K, const PoseSE3& T) {
  RenderedView view;
  view.image = ImageGray(K.width, K.height, 0.0);
  const std::size_t n = static_cast<std::size_t>(K.width) * K.height;
  view.depth.assign(n, 0.0);
  view.correspondence.assign(n, Vec3::Zero());
  view.valid.assign(n, 0);
  view.pose = T;
  view.intrinsics = K;
  return view;
}

/// Shades one pixel; returns false for a hole.
inline bool shade_one(const ReorganizedCloud& reorg, const CameraIntrinsics& K, int x, int y,
                      const RenderParams& params, NeighborSet& scratch,
                      std::vector<Vec3>& fg_scratch, Vec3& p_cam, double& value) {
  gather_into(reorg, x, y, params.window, scratch);
  if (scratch.empty()) return false;
  filter_foreground(scratch, params.xi);

  fg_scratch.clear();
  const NeighborPoint* nearest = nullptr;
  double dmax_fg = 0.0;
  for (std::size_t j = 0; j < scratch.points.size(); ++j) {
    if (!scratch.flags[j]) continue;
    const auto& p = scratch.points[j];
    fg_scratch.push_back(p.point_cam);
    dmax_fg = std::max(dmax_fg, p.distance);
    if (!nearest || p.distance < nearest->distance) nearest = &p;
  }
  const Ray ray = pixel_ray(K, Vec2(x, y));

  bool have_plane_point = false;
  if (static_cast<int>(fg_scratch.size()) >= params.min_foreground) {
    Plane plane;
    if (fit_plane_impl(fg_scratch, plane) == PlaneFitStatus::Ok &&
        intersect_impl(ray, plane, p_cam) == IntersectStatus::Ok) {
      // Reject grazing intersections that run far away from the neighborhood.
      const double d = p_cam.norm();
      have_plane_point = d >= 0.5 * nearest->distance && d <= 1.5 * dmax_fg;
    }
  }
  if (!have_plane_point) {
    // depth of the foreground point landing closest to this pixel, carried
    // along the pixel's ray
    const NeighborPoint* closest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < scratch.points.size(); ++j) {
      if (!scratch.flags[j]) continue;
      const auto& p = scratch.points[j];
      const double u = K.fx * p.point_cam.x() / p.point_cam.z() + K.cx - x;
      const double v = K.fy * p.point_cam.y() / p.point_cam.z() + K.cy - y;
      const double d2 = u * u + v * v;
      if (d2 < best || (d2 == best && p.distance < closest->distance)) {
        best = d2;
        closest = &p;
      }
    }
    p_cam = ray.direction * (closest->point_cam.z() / ray.direction.z());
    value = std::clamp(closest->value, 0.0, 1.0);
    return true;
  }
  value = shade_pixel(scratch, p_cam, params.xi);
  return true;
}

}  // namespace detail

/// Renders the cloud at pose T. Pixels with at least `min_foreground`
/// foreground neighbors get a plane-intersection correspondence; pixels with
/// fewer (or a degenerate fit) reuse the nearest foreground point's depth
/// along the pixel ray; pixels without neighbors stay holes.
[[nodiscard]] inline RenderedView render_view(const PointCloud& cloud, const CameraIntrinsics& K,
                                              const PoseSE3& T,
                                              const RenderParams& params = {}) {
  params.validate();
  RenderedView view = detail::empty_view(K, T);
  if (cloud.empty()) return view;
  const ReorganizedCloud reorg = project_zbuffer(cloud, K, T, params.workers);
  const PoseSE3 cam_to_world = T.inverse();

  parallel_for_chunks(static_cast<std::size_t>(K.height), params.workers,
                      [&](std::size_t row_begin, std::size_t row_end) {
    NeighborSet scratch;
    std::vector<Vec3> fg;
    scratch.points.reserve(static_cast<std::size_t>(params.window) * params.window);
    fg.reserve(scratch.points.capacity());
    for (std::size_t yy = row_begin; yy < row_end; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < K.width; ++x) {
        Vec3 p_cam;
        double value = 0.0;
        if (!detail::shade_one(reorg, K, x, y, params, scratch, fg, p_cam, value)) continue;
        const std::size_t idx = view.index(x, y);
        view.valid[idx] = 1;
        view.depth[idx] = p_cam.z();
        view.correspondence[idx] = cam_to_world * p_cam;
        view.image.pixels[idx] = value;
      }
    }
  });
  return view;
}

/// Baseline without neighbor inference: each pixel shows its z-buffer winner
/// only (holes elsewhere). Used to illustrate background bleed-through.
[[nodiscard]] inline RenderedView render_direct(const PointCloud& cloud, const CameraIntrinsics& K,
                                                const PoseSE3& T, int workers = 1) {
  RenderedView view = detail::empty_view(K, T);
  if (cloud.empty()) return view;
  const ReorganizedCloud reorg = project_zbuffer(cloud, K, T, workers);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Slot& s = reorg.at(x, y);
      if (!s.occupied()) continue;
      const std::size_t idx = view.index(x, y);
      view.valid[idx] = 1;
      view.depth[idx] = s.depth;
      view.correspondence[idx] = cloud.points[static_cast<std::size_t>(s.index)];
      view.image.pixels[idx] = std::clamp(s.value, 0.0, 1.0);
    }
  }
  return view;
}

}  // namespace roadreg

#endif  // ROADREG_RENDER_NEIGHBOR_RENDER_HPP
