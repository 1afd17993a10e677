// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Extrinsic refinement by point-to-line reprojection error: 3D edge points are
// projected with the current pose, each is tied to a line fitted through its
// nearest camera-image edge pixels, and a Levenberg-Marquardt loop over the
// SE(3) tangent space minimizes the (Huber-robustified) normal distances.

#ifndef ROADREG_OPTIM_OPTIMIZER_HPP
#define ROADREG_OPTIM_OPTIMIZER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "roadreg/core/camera.hpp"
#include "roadreg/core/lie.hpp"
#include "roadreg/core/parallel.hpp"
#include "roadreg/edges/edges.hpp"

namespace roadreg {

struct LineLocalModel {
  Vec2 q0 = Vec2::Zero();
  Vec2 n = Vec2::UnitY();
};

struct OptimizeParams {
  int M = 10;
  int max_iterations = 50;  // outer (re-association) iterations
  int max_inner = 10;       // accepted LM steps per association epoch
  double lambda_init = 1e-3;
  double convergence_tol = 1e-8;
  double huber_delta_px = 2.0;  // infinity gives plain least squares
  double max_assoc_dist_px = 30.0;  // association gate of the first epoch
  double min_assoc_dist_px = 4.0;   // floor of the adaptive gate
  double gate_sigmas = 3.0;         // later gates: this many robust sigmas of the residuals
  double max_translation_m = 10.0;
  int workers = 1;

  void validate() const {
    if (M < 2) fail(ErrorCode::ConfigError, "optim", "M must be >= 2");
    if (max_iterations < 1 || max_inner < 1) {
      fail(ErrorCode::ConfigError, "optim", "iteration limits must be >= 1");
    }
    if (!(lambda_init > 0) || !(convergence_tol > 0) || !(huber_delta_px > 0) ||
        !(max_assoc_dist_px > 0) || !(min_assoc_dist_px > 0) || !(gate_sigmas > 0) ||
        !(max_translation_m > 0)) {
      fail(ErrorCode::ConfigError, "optim", "tolerances must be positive");
    }
    if (min_assoc_dist_px > max_assoc_dist_px) {
      fail(ErrorCode::ConfigError, "optim", "min_assoc_dist_px exceeds max_assoc_dist_px");
    }
  }
};

struct Association {
  std::size_t point_index = 0;
  Vec3 point;  // world
  LineLocalModel line;
};

struct StepRecord {
  int epoch = 0;
  double cost = 0.0;  // robust cost after the accepted step
};

struct RegistrationResult {
  PoseSE3 pose;
  int iterations = 0;
  std::vector<double> residual_rms;  // px, after each outer iteration
  std::vector<std::size_t> active;   // associations per outer iteration
  std::vector<double> gate_px;       // association gate used per outer iteration
  std::vector<StepRecord> steps;     // every accepted LM step
  bool converged = false;
};

/// n is the unit eigenvector of the smaller eigenvalue of the pixels'
/// covariance, signed so that n.x > 0 (or n.y > 0 when n.x == 0); q0 is the
/// pixel nearest to `query`.
[[nodiscard]] inline LineLocalModel fit_line_model(std::span<const Vec2> pixels,
                                                   const Vec2& query) {
  if (pixels.size() < 2) fail(ErrorCode::DegeneratePixels, "optim", "need at least 2 pixels");
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : pixels) mean += p;
  mean /= static_cast<double>(pixels.size());
  Eigen::Matrix2d C = Eigen::Matrix2d::Zero();
  for (const Vec2& p : pixels) C += (p - mean) * (p - mean).transpose();
  if (C.trace() <= 1e-24) fail(ErrorCode::DegeneratePixels, "optim", "all pixels coincide");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(C);
  Vec2 n = es.eigenvectors().col(0).normalized();
  if (n.x() < 0 || (n.x() == 0 && n.y() < 0)) n = -n;

  LineLocalModel model;
  model.n = n;
  double best = std::numeric_limits<double>::infinity();
  for (const Vec2& p : pixels) {
    const double d = (p - query).squaredNorm();
    if (d < best) {
      best = d;
      model.q0 = p;
    }
  }
  return model;
}

[[nodiscard]] inline double point_line_residual(const LineLocalModel& model, const Vec2& p) {
  return model.n.dot(p - model.q0);
}

/// One association per edge point that projects in front of the camera and
/// inside the image, keyed by its M nearest edge pixels; q0 is the nearest.
[[nodiscard]] inline std::vector<Association> associate(const EdgeSet3D& edges3d,
                                                        const EdgeIndex& index,
                                                        const CameraIntrinsics& K,
                                                        const PoseSE3& Tbar, int M,
                                                        double max_assoc_dist,
                                                        int workers = 1) {
  std::vector<std::optional<Association>> slots(edges3d.size());
  parallel_for(edges3d.size(), workers, [&](std::size_t i) {
    const auto proj = try_project(K, Tbar, edges3d.points[i]);
    if (!proj || !K.contains(proj->pixel.x(), proj->pixel.y())) return;
    const auto nn = index.knn(proj->pixel, static_cast<std::size_t>(M));
    if (nn.empty() || nn.front().dist2 > max_assoc_dist * max_assoc_dist) return;
    std::vector<Vec2> px;
    px.reserve(nn.size());
    for (const auto& n : nn) px.push_back(index.pixel(n.index));
    try {
      LineLocalModel line = fit_line_model(px, proj->pixel);
      line.q0 = px.front();
      slots[i] = Association{i, edges3d.points[i], line};
    } catch (const Error&) {
    }
  });
  std::vector<Association> out;
  for (auto& s : slots)
    if (s) out.push_back(*s);
  if (out.empty()) fail(ErrorCode::NoAssociations, "optim", "no edge point found a camera edge");
  return out;
}

struct CostEvaluation {
  double cost = 0.0;        // sum of Huber losses
  double sum_sq = 0.0;      // sum of squared residuals
  Vec6 gradient = Vec6::Zero();
  Mat6 hessian = Mat6::Zero();  // IRLS Gauss-Newton approximation
  std::size_t count = 0;
  bool valid = true;            // false if some point fell behind the camera
};

namespace detail {

inline constexpr std::size_t kReductionChunk = 256;

inline double huber(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

/// 1.4826 * median |r| at pose T; 0 for an empty set.
inline double robust_sigma(const std::vector<Association>& assoc, const CameraIntrinsics& K,
                           const PoseSE3& T) {
  std::vector<double> r;
  r.reserve(assoc.size());
  for (const auto& a : assoc) {
    const Vec3 pc = T * a.point;
    if (pc.z() <= 1e-9) continue;
    const Vec2 px(K.fx * pc.x() / pc.z() + K.cx, K.fy * pc.y() / pc.z() + K.cy);
    r.push_back(std::abs(point_line_residual(a.line, px)));
  }
  if (r.empty()) return 0.0;
  const auto mid = r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2);
  std::nth_element(r.begin(), mid, r.end());
  return 1.4826 * *mid;
}

}  // namespace detail

/// Robust cost at pose T and its derivatives with respect to a left twist.
/// Partial sums are formed over fixed-size chunks and added in order, so the
/// result does not depend on the worker count.
[[nodiscard]] inline CostEvaluation evaluate_cost(const std::vector<Association>& assoc,
                                                  const CameraIntrinsics& K, const PoseSE3& T,
                                                  double huber_delta, bool derivatives = true,
                                                  int workers = 1) {
  const std::size_t chunks = (assoc.size() + detail::kReductionChunk - 1) / detail::kReductionChunk;
  std::vector<CostEvaluation> partial(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    CostEvaluation& e = partial[c];
    const std::size_t end = std::min(assoc.size(), (c + 1) * detail::kReductionChunk);
    for (std::size_t i = c * detail::kReductionChunk; i < end; ++i) {
      const Vec3 pc = T * assoc[i].point;
      if (pc.z() <= 1e-9) {
        e.valid = false;
        continue;
      }
      const Vec2 px(K.fx * pc.x() / pc.z() + K.cx, K.fy * pc.y() / pc.z() + K.cy);
      const double r = point_line_residual(assoc[i].line, px);
      e.cost += detail::huber(r, huber_delta);
      e.sum_sq += r * r;
      ++e.count;
      if (!derivatives) continue;
      const Eigen::Matrix<double, 1, 6> J = assoc[i].line.n.transpose() * pixel_jacobian_wrt_twist(K, pc);
      const double w = std::abs(r) <= huber_delta ? 1.0 : huber_delta / std::abs(r);
      e.gradient += w * r * J.transpose();
      e.hessian += w * J.transpose() * J;
    }
  });
  CostEvaluation total;
  for (const auto& e : partial) {
    total.cost += e.cost;
    total.sum_sq += e.sum_sq;
    total.gradient += e.gradient;
    total.hessian += e.hessian;
    total.count += e.count;
    total.valid = total.valid && e.valid;
  }
  return total;
}

/// Alternates association at the current pose with LM steps T <- exp(d) T on
/// the fixed association set. The first epoch gates associations at
/// `max_assoc_dist_px`; later ones at gate_sigmas robust sigmas of the previous
/// epoch's residuals, clamped to [min_assoc_dist_px, max_assoc_dist_px].
/// Stops when an epoch moves the pose by less than `convergence_tol` (tangent
/// norm), when it returns to within that of the start of one of the last
/// eight epochs, or after `max_iterations` epochs.
[[nodiscard]] inline RegistrationResult optimize(const EdgeSet3D& edges3d, const EdgeIndex& index,
                                                 const CameraIntrinsics& K, const PoseSE3& T0,
                                                 const OptimizeParams& params = {}) {
  params.validate();
  if (edges3d.empty()) fail(ErrorCode::NoAssociations, "optim", "no 3D edge points");
  RegistrationResult result;
  PoseSE3 T = T0;
  const Vec3 c0 = T0.center();
  double gate = params.max_assoc_dist_px;
  std::vector<PoseSE3> starts;  // epoch start poses, most recent last
  for (int epoch = 0; epoch < params.max_iterations; ++epoch) {
    const auto assoc = associate(edges3d, index, K, T, params.M, gate, params.workers);
    result.gate_px.push_back(gate);
    starts.push_back(T);
    double lambda = params.lambda_init;
    CostEvaluation cur = evaluate_cost(assoc, K, T, params.huber_delta_px, true, params.workers);
    for (int inner = 0; inner < params.max_inner; ++inner) {
      bool accepted = false;
      Vec6 step = Vec6::Zero();
      for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
        Mat6 A = cur.hessian;
        A.diagonal() += lambda * cur.hessian.diagonal().cwiseMax(1e-12);
        step = -A.ldlt().solve(cur.gradient);
        if (!step.allFinite()) break;
        const PoseSE3 cand = boxplus(T, Twist::from_vector(step));
        const CostEvaluation next =
            evaluate_cost(assoc, K, cand, params.huber_delta_px, true, params.workers);
        if (next.valid && next.cost <= cur.cost) {
          T = cand;
          T.R = orthonormalize(T.R);
          cur = next;
          lambda = std::max(lambda / 3.0, 1e-12);
          accepted = true;
          result.steps.push_back({epoch, cur.cost});
        } else {
          lambda *= 10.0;
        }
      }
      if (!accepted || step.norm() < params.convergence_tol) break;
    }
    if ((T.center() - c0).norm() > params.max_translation_m) {
      fail(ErrorCode::DivergedPose, "optim", "camera moved more than the allowed distance");
    }
    result.iterations = epoch + 1;
    result.active.push_back(cur.count);
    result.residual_rms.push_back(cur.count ? std::sqrt(cur.sum_sq / static_cast<double>(cur.count)) : 0.0);
    const double used = gate;
    gate = std::clamp(params.gate_sigmas * detail::robust_sigma(assoc, K, T),
                      params.min_assoc_dist_px, params.max_assoc_dist_px);
    // near the optimum the association set can cycle through a few states
    constexpr std::size_t kCycleWindow = 8;
    bool revisited = false;
    for (std::size_t k = starts.size() > kCycleWindow ? starts.size() - kCycleWindow : 0;
         k < starts.size() && !revisited; ++k) {
      revisited = log_se3(T * starts[k].inverse()).vector().norm() < params.convergence_tol;
    }
    if (revisited && std::abs(gate - used) <= 1e-3 * used) {
      result.converged = true;
      break;
    }
  }
  result.pose = T;
  return result;
}

}  // namespace roadreg

#endif  // ROADREG_OPTIM_OPTIMIZER_HPP
