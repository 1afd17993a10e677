// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Geometric domain types shared by all modules.

#ifndef ROADREG_CORE_TYPES_HPP
#define ROADREG_CORE_TYPES_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <cstddef>
#include <vector>

#include "roadreg/core/error.hpp"

namespace roadreg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Luma weights used for every RGB -> gray conversion in the project.
inline constexpr double kLumaR = 0.299;
inline constexpr double kLumaG = 0.587;
inline constexpr double kLumaB = 0.114;

/// Summed blue-red-green so that the weights (and white) add to exactly 1.0.
inline double luma(double r, double g, double b) {
  return kLumaB * b + kLumaR * r + kLumaG * g;
}

/// World-frame points with either RGB or intensity appearance in [0,1].
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> rgb;          // empty when intensity is used
  std::vector<double> intensity;  // empty when rgb is used

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  [[nodiscard]] bool has_rgb() const { return !rgb.empty(); }

  /// Grayscale appearance used by the renderer: luma for RGB, raw intensity
  /// otherwise.
  [[nodiscard]] double gray(std::size_t i) const {
    if (has_rgb()) return luma(rgb[i].x(), rgb[i].y(), rgb[i].z());
    if (!intensity.empty()) return intensity[i];
    return 0.5;
  }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;

  [[nodiscard]] bool valid() const {
    return fx > 0 && fy > 0 && cx > 0 && cx < width && cy > 0 && cy < height &&
           width > 0 && height > 0;
  }

  void validate() const {
    if (!valid()) {
      fail(ErrorCode::ConfigError, "core",
           "intrinsics require fx>0, fy>0, 0<cx<width, 0<cy<height");
    }
  }

  [[nodiscard]] Mat3 matrix() const {
    Mat3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  /// True when (u,v) lies inside [0,width) x [0,height).
  [[nodiscard]] bool contains(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < width && v < height;
  }
};

/// Rigid transform mapping world coordinates to camera coordinates:
/// X_cam = R * X_world + t.
struct PoseSE3 {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static PoseSE3 identity() { return {}; }

  [[nodiscard]] Vec3 operator*(const Vec3& p) const { return R * p + t; }

  [[nodiscard]] PoseSE3 operator*(const PoseSE3& other) const {
    return {R * other.R, R * other.t + t};
  }

  [[nodiscard]] PoseSE3 inverse() const {
    return {R.transpose(), -(R.transpose() * t)};
  }

  /// Camera center in world coordinates.
  [[nodiscard]] Vec3 center() const { return -(R.transpose() * t); }

  [[nodiscard]] bool is_valid(double tol = 1e-9) const {
    return (R.transpose() * R - Mat3::Identity()).norm() < tol &&
           std::abs(R.determinant() - 1.0) < tol && t.allFinite();
  }
};

/// Tangent-space perturbation (rotation part first).
struct Twist {
  Vec3 dtheta = Vec3::Zero();
  Vec3 dt = Vec3::Zero();

  static Twist from_vector(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }

  [[nodiscard]] Vec6 vector() const {
    Vec6 v;
    v << dtheta, dt;
    return v;
  }

  [[nodiscard]] Twist operator-() const { return {-dtheta, -dt}; }
  [[nodiscard]] bool finite() const { return dtheta.allFinite() && dt.allFinite(); }
};

/// Camera-frame ray through a pixel; origin is the camera center.
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

/// a*x + b*y + c*z + d = 0 with unit normal (a,b,c), camera frame.
struct Plane {
  Vec3 normal = Vec3::UnitZ();
  double d = 0.0;

  [[nodiscard]] double signed_distance(const Vec3& p) const {
    return normal.dot(p) + d;
  }
};

}  // namespace roadreg

#endif  // ROADREG_CORE_TYPES_HPP
