// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Perspective-n-point: a three-point solver (Grunert's formulation reduced to
// a quartic), RANSAC over four-point samples, and Levenberg-Marquardt
// refinement of the reprojection error.

#ifndef ROADREG_MATCHINIT_PNP_HPP
#define ROADREG_MATCHINIT_PNP_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "roadreg/core/camera.hpp"
#include "roadreg/core/lie.hpp"

namespace roadreg {

struct Correspondence2D3D {
  Vec2 pixel;  // camera image
  Vec3 point;  // world
};

struct RansacParams {
  double threshold_px = 3.0;
  int max_iterations = 1000;
  int min_inliers = 30;
  double confidence = 0.9999;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(threshold_px > 0) || max_iterations < 1 || min_inliers < 4 ||
        !(confidence > 0 && confidence < 1)) {
      fail(ErrorCode::ConfigError, "matchinit", "invalid RANSAC parameters");
    }
  }
};

struct PnpResult {
  PoseSE3 pose;
  std::vector<std::size_t> inliers;  // indices into the input list, ascending
  double rms_px = 0.0;               // over inliers
  int iterations = 0;
};

namespace detail {

using Poly = std::vector<double>;  // coefficients, lowest degree first

inline Poly poly_mul(const Poly& a, const Poly& b) {
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

inline Poly poly_add(Poly a, const Poly& b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
  return a;
}

inline double poly_eval(const Poly& p, double x) {
  double r = 0;
  for (std::size_t i = p.size(); i-- > 0;) r = r * x + p[i];
  return r;
}

/// Real roots via companion-matrix eigenvalues, polished by Newton steps.
inline std::vector<double> real_roots(Poly p) {
  while (p.size() > 1 && std::abs(p.back()) < 1e-14 * (std::abs(p.front()) + 1e-300)) p.pop_back();
  const int n = static_cast<int>(p.size()) - 1;
  std::vector<double> roots;
  if (n < 1) return roots;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) companion(0, i) = -p[n - 1 - i] / p[n];
  for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, false);
  Poly dp(p.size() - 1);
  for (std::size_t i = 1; i < p.size(); ++i) dp[i - 1] = static_cast<double>(i) * p[i];
  for (int i = 0; i < n; ++i) {
    const std::complex<double> z = es.eigenvalues()[i];
    if (std::abs(z.imag()) > 1e-6 * std::max(1.0, std::abs(z))) continue;
    double x = z.real();
    for (int it = 0; it < 5; ++it) {
      const double d = poly_eval(dp, x);
      if (d == 0) break;
      x -= poly_eval(p, x) / d;
    }
    roots.push_back(x);
  }
  return roots;
}

/// Rigid R, t minimizing sum |R a_i + t - b_i|^2.
inline PoseSE3 kabsch(std::span<const Vec3> a, std::span<const Vec3> b) {
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());
  Mat3 H = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) H += (a[i] - ca) * (b[i] - cb).transpose();
  Eigen::JacobiSVD<Mat3> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) D(2, 2) = -1;
  PoseSE3 T;
  T.R = svd.matrixV() * D * svd.matrixU().transpose();
  T.t = cb - T.R * ca;
  return T;
}

inline double reprojection_error(const CameraIntrinsics& K, const PoseSE3& T,
                                 const Correspondence2D3D& c) {
  const Vec3 p = T * c.point;
  if (p.z() <= 0) return std::numeric_limits<double>::infinity();
  return (Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy) - c.pixel).norm();
}

}  // namespace detail

/// All real solutions of the three-point problem. `bearings` are unit camera
/// rays, `points` the matching world points.
[[nodiscard]] inline std::vector<PoseSE3> solve_p3p(const std::array<Vec3, 3>& bearings,
                                                    const std::array<Vec3, 3>& points) {
  using detail::Poly;
  std::vector<PoseSE3> out;
  const double a2 = (points[1] - points[2]).squaredNorm();
  const double b2 = (points[0] - points[2]).squaredNorm();
  const double c2 = (points[0] - points[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return out;
  const double ca = bearings[1].dot(bearings[2]);
  const double cb = bearings[0].dot(bearings[2]);
  const double cg = bearings[0].dot(bearings[1]);

  // depths s2 = u s1, s3 = v s1; eliminating s1 and u leaves a quartic in v
  const Poly Q{1.0, -2.0 * cb, 1.0};
  const Poly N = detail::poly_add(Poly{-b2, 0.0, b2}, Q, c2 - a2);
  const Poly Dn{-2.0 * b2 * cg, 2.0 * b2 * ca};
  Poly quartic = detail::poly_mul(N, N);
  for (double& v : quartic) v *= b2;
  quartic = detail::poly_add(quartic, detail::poly_mul(N, Dn), -2.0 * b2 * cg);
  const Poly DnDn = detail::poly_mul(Dn, Dn);
  quartic = detail::poly_add(quartic, DnDn, b2);
  quartic = detail::poly_add(quartic, detail::poly_mul(Q, DnDn), -c2);

  for (const double v : detail::real_roots(quartic)) {
    if (!(v > 0)) continue;
    const double dn = detail::poly_eval(Dn, v);
    if (std::abs(dn) < 1e-12) continue;
    const double u = detail::poly_eval(N, v) / dn;
    if (!(u > 0)) continue;
    const double q = detail::poly_eval(Q, v);
    if (!(q > 0)) continue;
    const double s1 = std::sqrt(b2 / q);
    const std::array<Vec3, 3> cam{bearings[0] * s1, bearings[1] * (u * s1), bearings[2] * (v * s1)};
    PoseSE3 T = detail::kabsch(points, cam);
    if (T.R.allFinite() && T.t.allFinite()) out.push_back(T);
  }
  return out;
}

/// Levenberg-Marquardt on the summed squared reprojection error of `subset`.
[[nodiscard]] inline PoseSE3 refine_pose_lm(const std::vector<Correspondence2D3D>& corrs,
                                            std::span<const std::size_t> subset,
                                            const CameraIntrinsics& K, PoseSE3 T,
                                            int max_iterations = 30) {
  auto cost = [&](const PoseSE3& pose) {
    double c = 0;
    for (std::size_t i : subset) {
      const Vec3 p = pose * corrs[i].point;
      if (p.z() <= 1e-9) return std::numeric_limits<double>::infinity();
      c += (Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy) - corrs[i].pixel)
               .squaredNorm();
    }
    return c;
  };
  double lambda = 1e-3;
  double current = cost(T);
  for (int it = 0; it < max_iterations; ++it) {
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i : subset) {
      const Vec3 p = T * corrs[i].point;
      const Vec2 r = Vec2(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy) - corrs[i].pixel;
      const Eigen::Matrix<double, 2, 6> J = pixel_jacobian_wrt_twist(K, p);
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    bool accepted = false;
    for (int tries = 0; tries < 10 && !accepted; ++tries) {
      Mat6 A = H;
      A.diagonal() += lambda * H.diagonal().cwiseMax(1e-9);
      const Vec6 step = -A.ldlt().solve(g);
      if (!step.allFinite()) break;
      const PoseSE3 candidate = boxplus(T, Twist::from_vector(step));
      const double c = cost(candidate);
      if (c <= current) {
        T = candidate;
        T.R = orthonormalize(T.R);
        const double gain = current - c;
        current = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        if (step.norm() < 1e-12 || gain <= 1e-16 * (1.0 + current)) return T;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }
  return T;
}

namespace detail {

inline std::vector<std::size_t> collect_inliers(const std::vector<Correspondence2D3D>& corrs,
                                                const CameraIntrinsics& K, const PoseSE3& T,
                                                double threshold, double* sum_err = nullptr) {
  std::vector<std::size_t> in;
  double s = 0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const double e = reprojection_error(K, T, corrs[i]);
    if (e < threshold) {
      in.push_back(i);
      s += e;
    }
  }
  if (sum_err) *sum_err = s;
  return in;
}

// canonical order so that the result does not depend on the input order
inline bool corr_less(const Correspondence2D3D& a, const Correspondence2D3D& b) {
  const std::array<double, 5> ka{a.pixel.x(), a.pixel.y(), a.point.x(), a.point.y(), a.point.z()};
  const std::array<double, 5> kb{b.pixel.x(), b.pixel.y(), b.point.x(), b.point.y(), b.point.z()};
  return ka < kb;
}

}  // namespace detail

/// RANSAC over four-point samples (three for the solver, the fourth to pick
/// among its solutions), then LM on the inliers, re-scoring until the inlier
/// set is stable.
[[nodiscard]] inline PnpResult solve_pnp_ransac(const std::vector<Correspondence2D3D>& input,
                                                const CameraIntrinsics& K,
                                                const RansacParams& params = {}) {
  params.validate();
  if (input.size() < 4) {
    fail(ErrorCode::InsufficientCorrespondences, "matchinit",
         "need at least 4 correspondences, got " + std::to_string(input.size()));
  }
  std::vector<std::size_t> order(input.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detail::corr_less(input[a], input[b]);
  });
  std::vector<Correspondence2D3D> corrs;
  corrs.reserve(input.size());
  for (std::size_t i : order) corrs.push_back(input[i]);

  const Mat3 Kinv = K.matrix().inverse();
  auto bearing = [&](const Vec2& px) { return Vec3(Kinv * Vec3(px.x(), px.y(), 1.0)).normalized(); };

  std::mt19937_64 rng(params.seed);
  const std::size_t n = corrs.size();
  std::vector<std::size_t> best_inliers;
  double best_err = std::numeric_limits<double>::infinity();
  PoseSE3 best_pose;
  int iterations = 0;
  int needed = params.max_iterations;
  for (int it = 0; it < needed && it < params.max_iterations; ++it) {
    ++iterations;
    std::array<std::size_t, 4> s{};
    for (int k = 0; k < 4; ++k) {
      bool fresh = false;
      while (!fresh) {
        s[k] = static_cast<std::size_t>(rng() % n);
        fresh = std::find(s.begin(), s.begin() + k, s[k]) == s.begin() + k;
      }
    }
    const auto sols = solve_p3p({bearing(corrs[s[0]].pixel), bearing(corrs[s[1]].pixel),
                                 bearing(corrs[s[2]].pixel)},
                                {corrs[s[0]].point, corrs[s[1]].point, corrs[s[2]].point});
    const PoseSE3* pick = nullptr;
    double pick_err = std::numeric_limits<double>::infinity();
    for (const auto& T : sols) {
      const double e = detail::reprojection_error(K, T, corrs[s[3]]);
      if (e < pick_err) {
        pick_err = e;
        pick = &T;
      }
    }
    if (!pick || !(pick_err < params.threshold_px)) continue;
    double err = 0;
    auto inliers = detail::collect_inliers(corrs, K, *pick, params.threshold_px, &err);
    if (inliers.size() > best_inliers.size() ||
        (inliers.size() == best_inliers.size() && err < best_err)) {
      best_inliers = std::move(inliers);
      best_err = err;
      best_pose = *pick;
      const double w = static_cast<double>(best_inliers.size()) / static_cast<double>(n);
      const double miss = 1.0 - std::pow(w, 4);
      if (miss <= 0) {
        needed = it + 1;
      } else if (miss < 1) {
        needed = static_cast<int>(
            std::min<double>(params.max_iterations,
                             std::ceil(std::log(1 - params.confidence) / std::log(miss))));
      }
    }
  }
  if (static_cast<int>(best_inliers.size()) < params.min_inliers) {
    fail(ErrorCode::NoConsensus, "matchinit",
         "best hypothesis has " + std::to_string(best_inliers.size()) + " inliers, need " +
             std::to_string(params.min_inliers));
  }

  PoseSE3 pose = best_pose;
  std::vector<std::size_t> inliers = best_inliers;
  for (int round = 0; round < 5; ++round) {
    pose = refine_pose_lm(corrs, inliers, K, pose);
    auto next = detail::collect_inliers(corrs, K, pose, params.threshold_px);
    if (next == inliers) break;
    if (next.size() < 4) break;
    inliers = std::move(next);
  }
  if (static_cast<int>(inliers.size()) < params.min_inliers) {
    fail(ErrorCode::NoConsensus, "matchinit", "inlier set collapsed during refinement");
  }

  PnpResult result;
  result.pose = pose;
  result.iterations = iterations;
  double sq = 0;
  for (std::size_t i : inliers) {
    const double e = detail::reprojection_error(K, pose, corrs[i]);
    sq += e * e;
    result.inliers.push_back(order[i]);
  }
  result.rms_px = std::sqrt(sq / static_cast<double>(inliers.size()));
  std::sort(result.inliers.begin(), result.inliers.end());
  return result;
}

}  // namespace roadreg

#endif  // ROADREG_MATCHINIT_PNP_HPP
