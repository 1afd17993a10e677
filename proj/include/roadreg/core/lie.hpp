// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// SO(3)/SE(3) exponential and logarithm maps and the left-multiplicative
// manifold update used by the optimizers.

#ifndef ROADREG_CORE_LIE_HPP
#define ROADREG_CORE_LIE_HPP

#include <Eigen/Dense>
#include <cmath>

#include "roadreg/core/types.hpp"

namespace roadreg {

/// skew(v) * u == v.cross(u)
[[nodiscard]] inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<      0, -v.z(),  v.y(),
        v.z(),      0, -v.x(),
       -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

[[nodiscard]] inline Vec3 vee(const Mat3& s) {
  return {s(2, 1), s(0, 2), s(1, 0)};
}

/// Rodrigues: R = I + sin|w| K + (1 - cos|w|) K^2 with K = skew(w/|w|).
[[nodiscard]] inline Mat3 exp_so3(const Vec3& theta) {
  const double angle = theta.norm();
  const Mat3 w = skew(theta);
  if (angle < 1e-12) {
    // second-order Taylor expansion
    return Mat3::Identity() + w + 0.5 * w * w;
  }
  const Mat3 k = w / angle;
  const double half_sin = std::sin(0.5 * angle);
  return Mat3::Identity() + std::sin(angle) * k + (2.0 * half_sin * half_sin) * k * k;
}

/// Inverse of exp_so3. Throws NearPiRotation when the rotation angle is within
/// 1e-9 (in trace) of pi, where the logarithm is not unique.
[[nodiscard]] inline Vec3 log_so3(const Mat3& R) {
  const double tr = R.trace();
  if (tr <= -1.0 + 1e-9) {
    fail(ErrorCode::NearPiRotation, "core", "rotation angle is too close to pi");
  }
  const Vec3 axis_sin = 0.5 * vee(R - R.transpose());  // sin(angle) * axis
  const double s = axis_sin.norm();
  const double c = 0.5 * (tr - 1.0);
  const double angle = std::atan2(s, c);
  if (s < 1e-12) {
    // angle ~ 0; first-order
    return axis_sin;
  }
  return axis_sin * (angle / s);
}

/// Left Jacobian of SO(3): exp([w + d]) ~= exp([J_l(w) d]) exp([w]).
[[nodiscard]] inline Mat3 left_jacobian_so3(const Vec3& theta) {
  const double angle = theta.norm();
  const double a2 = angle * angle;
  const Mat3 w = skew(theta);
  if (angle < 1e-12) {
    return Mat3::Identity() + 0.5 * w + w * w / 6.0;
  }
  const double h = std::sin(0.5 * angle) / angle;
  const double c1 = 2.0 * h * h;  // (1 - cos a) / a^2 without cancellation
  // (a - sin a) / a^3; the closed form cancels badly for small angles
  const double c2 = angle < 0.1 ? 1.0 / 6.0 - a2 / 120.0 + a2 * a2 / 5040.0 - a2 * a2 * a2 / 362880.0
                                : (angle - std::sin(angle)) / (a2 * angle);
  return Mat3::Identity() + c1 * w + c2 * w * w;
}

[[nodiscard]] inline Mat3 left_jacobian_so3_inverse(const Vec3& theta) {
  const double angle = theta.norm();
  const double a2 = angle * angle;
  const Mat3 w = skew(theta);
  // (1 - (a/2) cot(a/2)) / a^2
  double coeff;
  if (angle < 0.1) {
    coeff = 1.0 / 12.0 + a2 / 720.0 + a2 * a2 / 30240.0 + a2 * a2 * a2 / 1209600.0;
  } else {
    const double half = 0.5 * angle;
    coeff = (1.0 - half * std::cos(half) / std::sin(half)) / a2;
  }
  return Mat3::Identity() - 0.5 * w + coeff * w * w;
}

/// Exact SE(3) exponential of a twist (rotation part first).
[[nodiscard]] inline PoseSE3 exp_se3(const Twist& xi) {
  return {exp_so3(xi.dtheta), left_jacobian_so3(xi.dtheta) * xi.dt};
}

[[nodiscard]] inline Twist log_se3(const PoseSE3& T) {
  const Vec3 theta = log_so3(T.R);
  return {theta, left_jacobian_so3_inverse(theta) * T.t};
}

/// T <- exp(delta) * Tbar, the perturbation acting on the world side.
[[nodiscard]] inline PoseSE3 boxplus(const PoseSE3& Tbar, const Twist& delta) {
  return exp_se3(delta) * Tbar;
}

/// Re-orthonormalise a rotation that has accumulated round-off.
[[nodiscard]] inline Mat3 orthonormalize(const Mat3& R) {
  Eigen::JacobiSVD<Mat3> svd(R, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 out = svd.matrixU() * svd.matrixV().transpose();
  if (out.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    out = u * svd.matrixV().transpose();
  }
  return out;
}

}  // namespace roadreg

#endif  // ROADREG_CORE_LIE_HPP
