// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Pose and ground-distance error metrics, and pixel -> 3D lookup through a
// rendered view.

#ifndef ROADREG_METRICS_METRICS_HPP
#define ROADREG_METRICS_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "roadreg/render/neighbor_render.hpp"

namespace roadreg {

struct PoseError {
  double trans_err_m = 0.0;   // mean absolute per-axis translation error
  double rot_err_deg = 0.0;   // mean absolute yaw/pitch/roll error (ZYX)
  double geodesic_deg = 0.0;  // rotation angle of R_gt^-1 R_est
};

/// ZYX Euler angles (yaw, pitch, roll) in radians of R = Rz(yaw) Ry(pitch) Rx(roll).
[[nodiscard]] inline Vec3 euler_zyx(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  return {std::atan2(R(1, 0), R(0, 0)), pitch, std::atan2(R(2, 1), R(2, 2))};
}

[[nodiscard]] inline PoseError pose_error(const PoseSE3& est, const PoseSE3& gt) {
  constexpr double kToDeg = 180.0 / std::numbers::pi;
  PoseError e;
  e.trans_err_m = (est.t - gt.t).cwiseAbs().mean();
  const Mat3 dR = gt.R.transpose() * est.R;
  const Vec3 eul = euler_zyx(dR);
  double sum = 0;
  for (int i = 0; i < 3; ++i) {
    // wrap to (-pi, pi]
    double a = std::remainder(eul[i], 2.0 * std::numbers::pi);
    if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    sum += std::abs(a);
  }
  e.rot_err_deg = sum / 3.0 * kToDeg;
  e.geodesic_deg = std::acos(std::clamp((dR.trace() - 1.0) / 2.0, -1.0, 1.0)) * kToDeg;
  return e;
}

namespace detail {

/// Correspondence under a pixel: bilinear over the four surrounding shaded
/// pixels when they lie on one surface, else the nearest pixel's own.
inline std::optional<Vec3> lookup_correspondence(const RenderedView& view, const Vec2& px,
                                                 double depth_gap = 0.5) {
  const int x0 = static_cast<int>(std::floor(px.x()));
  const int y0 = static_cast<int>(std::floor(px.y()));
  const double ax = px.x() - x0, ay = px.y() - y0;
  Vec3 acc = Vec3::Zero();
  Vec3 lo = Vec3::Constant(1e300), hi = Vec3::Constant(-1e300);
  double wsum = 0;
  bool ok = true;
  for (int dy = 0; dy <= 1 && ok; ++dy) {
    for (int dx = 0; dx <= 1; ++dx) {
      const double w = (dx ? ax : 1 - ax) * (dy ? ay : 1 - ay);
      if (w <= 1e-12) continue;
      if (!view.has(x0 + dx, y0 + dy)) {
        ok = false;
        break;
      }
      const Vec3& p = view.point(x0 + dx, y0 + dy);
      acc += w * p;
      wsum += w;
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  if (ok && wsum > 0 && (hi - lo).norm() <= depth_gap) return Vec3(acc / wsum);
  const int xn = static_cast<int>(std::lround(px.x()));
  const int yn = static_cast<int>(std::lround(px.y()));
  if (view.has(xn, yn)) return view.point(xn, yn);
  return std::nullopt;
}

}  // namespace detail

/// World point seen at `pixel`; falls back to the nearest shaded pixel within
/// `radius` pixels (ties in raster order).
[[nodiscard]] inline Vec3 locate_3d(const Vec2& pixel, const RenderedView& view,
                                    double radius = 7.0) {
  if (!(pixel.x() >= 0 && pixel.y() >= 0 && pixel.x() < view.width() && pixel.y() < view.height())) {
    fail(ErrorCode::BoundsError, "metrics", "pixel outside the view");
  }
  if (const auto p = detail::lookup_correspondence(view, pixel)) return *p;
  const int r = static_cast<int>(std::ceil(radius));
  const int cx = static_cast<int>(std::lround(pixel.x()));
  const int cy = static_cast<int>(std::lround(pixel.y()));
  double best = radius * radius;
  std::optional<Vec3> found;
  for (int y = cy - r; y <= cy + r; ++y) {
    for (int x = cx - r; x <= cx + r; ++x) {
      if (!view.has(x, y)) continue;
      const double d2 = (Vec2(x, y) - pixel).squaredNorm();
      if (d2 < best || (!found && d2 <= best)) {
        best = d2;
        found = view.point(x, y);
      }
    }
  }
  if (!found) {
    fail(ErrorCode::NoCorrespondence, "metrics",
         "no shaded pixel within " + std::to_string(radius) + " px");
  }
  return *found;
}

struct DistancePair {
  Vec2 a;
  Vec2 b;
  double distance = 0.0;  // ground truth [m]
};

struct DistanceError {
  std::vector<double> r;     // |d_est - d| / d per pair
  std::vector<double> d_est; // measured distances [m]
  double max_pct = 0.0;
  double median_pct = 0.0;
  double rmse_pct = 0.0;
};

[[nodiscard]] inline DistanceError ground_distance_errors(std::span<const DistancePair> pairs,
                                                          const RenderedView& view) {
  DistanceError out;
  for (const auto& p : pairs) {
    if (!(p.distance > 0)) fail(ErrorCode::ConfigError, "metrics", "reference distance must be positive");
    const auto a = detail::lookup_correspondence(view, p.a);
    const auto b = detail::lookup_correspondence(view, p.b);
    if (!a || !b) fail(ErrorCode::NoCorrespondence, "metrics", "distance pair lands on a hole");
    const double d = (*a - *b).norm();
    out.d_est.push_back(d);
    out.r.push_back(std::abs(d - p.distance) / p.distance);
  }
  if (out.r.empty()) return out;
  std::vector<double> sorted = out.r;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  out.max_pct = 100.0 * sorted.back();
  out.median_pct = 100.0 * (n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]));
  double sq = 0;
  for (double v : sorted) sq += v * v;
  out.rmse_pct = 100.0 * std::sqrt(sq / static_cast<double>(n));
  return out;
}

}  // namespace roadreg

#endif  // ROADREG_METRICS_METRICS_HPP
