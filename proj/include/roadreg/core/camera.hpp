// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera model (no distortion). Pixel centers sit at integer
// coordinates: pixel (col, row) is the point u = col, v = row.

#ifndef ROADREG_CORE_CAMERA_HPP
#define ROADREG_CORE_CAMERA_HPP

#include <Eigen/Core>
#include <cmath>
#include <optional>

#include "roadreg/core/lie.hpp"
#include "roadreg/core/types.hpp"

namespace roadreg {

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

/// Unit-norm camera-frame ray through pixel (u, v).
[[nodiscard]] inline Ray pixel_ray(const CameraIntrinsics& K, const Vec2& pixel) {
  Vec3 dir((pixel.x() - K.cx) / K.fx, (pixel.y() - K.cy) / K.fy, 1.0);
  return {Vec3::Zero(), dir.normalized()};
}

/// Projects a camera-frame point. Returns nullopt when Z <= 0.
[[nodiscard]] inline std::optional<Projection> project_camera_point(
    const CameraIntrinsics& K, const Vec3& p_cam) {
  if (!(p_cam.z() > 0.0)) return std::nullopt;
  const double inv_z = 1.0 / p_cam.z();
  return Projection{{K.fx * p_cam.x() * inv_z + K.cx, K.fy * p_cam.y() * inv_z + K.cy},
                    p_cam.z()};
}

[[nodiscard]] inline std::optional<Projection> try_project(const CameraIntrinsics& K,
                                                           const PoseSE3& T,
                                                           const Vec3& p_world) {
  return project_camera_point(K, T * p_world);
}

/// u = fx X/Z + cx, v = fy Y/Z + cy with (X,Y,Z) = R P + t. Throws BehindCamera
/// when Z <= 0.
[[nodiscard]] inline Projection project_point(const CameraIntrinsics& K,
                                              const PoseSE3& T, const Vec3& p_world) {
  auto proj = try_project(K, T, p_world);
  if (!proj) fail(ErrorCode::BehindCamera, "core", "point has non-positive depth");
  return *proj;
}

/// d(u,v)/d(X,Y,Z) of the pinhole projection at a camera-frame point.
[[nodiscard]] inline Eigen::Matrix<double, 2, 3> projection_jacobian(
    const CameraIntrinsics& K, const Vec3& p_cam) {
  const double inv_z = 1.0 / p_cam.z();
  const double inv_z2 = inv_z * inv_z;
  Eigen::Matrix<double, 2, 3> J;
  J << K.fx * inv_z, 0.0, -K.fx * p_cam.x() * inv_z2,  //
      0.0, K.fy * inv_z, -K.fy * p_cam.y() * inv_z2;
  return J;
}

/// d(pixel)/d(delta) for T = exp(delta) * Tbar, evaluated at delta = 0.
/// p_cam is Tbar * P_world.
[[nodiscard]] inline Eigen::Matrix<double, 2, 6> pixel_jacobian_wrt_twist(
    const CameraIntrinsics& K, const Vec3& p_cam) {
  Eigen::Matrix<double, 3, 6> dp;
  dp.leftCols<3>() = -skew(p_cam);
  dp.rightCols<3>() = Mat3::Identity();
  return projection_jacobian(K, p_cam) * dp;
}

/// World->camera pose of a camera at `center` with the given yaw (about world
/// +Z, measured from +X), pitch (positive up) and roll (about the optical
/// axis), all in radians. World is Z-up; camera is x right, y down, z forward.
[[nodiscard]] inline PoseSE3 pose_from_yaw_pitch_roll(const Vec3& center, double yaw,
                                                      double pitch, double roll) {
  const Vec3 forward(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch),
                     std::sin(pitch));
  const Vec3 right0(std::sin(yaw), -std::cos(yaw), 0.0);
  const Vec3 down0 = forward.cross(right0);
  const double cr = std::cos(roll);
  const double sr = std::sin(roll);
  const Vec3 right = cr * right0 + sr * down0;
  const Vec3 down = -sr * right0 + cr * down0;
  Mat3 R_cw;
  R_cw.col(0) = right;
  R_cw.col(1) = down;
  R_cw.col(2) = forward;
  PoseSE3 T;
  T.R = R_cw.transpose();
  T.t = -(T.R * center);
  return T;
}

}  // namespace roadreg

#endif  // ROADREG_CORE_CAMERA_HPP
