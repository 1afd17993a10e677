// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Initial extrinsic guess from a rough camera position: render pseudo views at
// sampled yaws, match them against the camera image, lift the matches to 2D-3D
// and run PnP; then re-render at the rough pose and match once more.

#ifndef ROADREG_MATCHINIT_INITIAL_GUESS_HPP
#define ROADREG_MATCHINIT_INITIAL_GUESS_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "roadreg/matchinit/features.hpp"
#include "roadreg/matchinit/pnp.hpp"
#include "roadreg/render/neighbor_render.hpp"

namespace roadreg {

enum class MatcherBackend { Builtin, ExternalFile };

struct InitialGuessParams {
  Vec3 rough_position = Vec3::Zero();
  double pitch_deg = -10.0;
  double roll_deg = 0.0;
  int yaw_count = 8;
  int min_inliers = 30;
  double ransac_threshold_px = 3.0;
  int ransac_iters = 1000;
  std::uint64_t seed = 42;
  bool refine = true;  // second stage at the rough pose

  void validate() const {
    if (yaw_count < 1) fail(ErrorCode::ConfigError, "matchinit", "yaw_count must be >= 1");
    if (!(ransac_threshold_px > 0)) {
      fail(ErrorCode::ConfigError, "matchinit", "ransac_threshold_px must be positive");
    }
    if (min_inliers < 4) fail(ErrorCode::ConfigError, "matchinit", "min_inliers must be >= 4");
    if (ransac_iters < 1) fail(ErrorCode::ConfigError, "matchinit", "ransac_iters must be >= 1");
    if (!rough_position.allFinite()) {
      fail(ErrorCode::ConfigError, "matchinit", "rough_position must be finite");
    }
  }
};

/// Where matches come from. For ExternalFile, `matches_dir` holds
/// `yaw_<k>.txt` per sampled yaw and optionally `refine.txt` for the second
/// stage; side (a) of each line is the rendered view, side (b) the camera image.
struct MatcherConfig {
  MatcherBackend backend = MatcherBackend::Builtin;
  std::filesystem::path matches_dir;
  FeatureParams features;
};

struct StageDiagnostics {
  std::string stage;  // "yaw" or "refine"
  int yaw_index = -1;
  double yaw_deg = 0.0;
  std::size_t matches = 0;
  std::size_t lifted = 0;
  std::size_t inliers = 0;
  double rms_px = 0.0;
  std::string status;  // "ok" or the error code name
};

struct InitialGuessResult {
  PoseSE3 pose;
  std::size_t inliers = 0;
  std::string chosen_stage;
  std::vector<StageDiagnostics> stages;
};

[[nodiscard]] inline std::vector<PoseSE3> sample_yaw_poses(const InitialGuessParams& params) {
  params.validate();
  const double deg = std::numbers::pi / 180.0;
  std::vector<PoseSE3> poses;
  for (int k = 0; k < params.yaw_count; ++k) {
    const double yaw = 360.0 * k / params.yaw_count;
    poses.push_back(pose_from_yaw_pitch_roll(params.rough_position, yaw * deg,
                                             params.pitch_deg * deg, params.roll_deg * deg));
  }
  return poses;
}

/// Camera image pixel / world point pairs for matches whose side (a) lands on a
/// shaded pixel of the view (nearest pixel center).
[[nodiscard]] inline std::vector<Correspondence2D3D> lift_matches(const MatchList& matches,
                                                                  const RenderedView& view) {
  std::vector<Correspondence2D3D> out;
  for (const auto& m : matches) {
    const int x = static_cast<int>(std::lround(m.a.x()));
    const int y = static_cast<int>(std::lround(m.a.y()));
    if (!view.has(x, y)) continue;
    out.push_back({m.b, view.point(x, y)});
  }
  return out;
}

/// Builtin matching, or the contents of an external match file validated
/// against both image sizes.
[[nodiscard]] inline MatchList match_features(const ImageGray& image_a, const ImageGray& image_b,
                                              const MatcherConfig& matcher,
                                              const std::string& file_name = {}) {
  if (matcher.backend == MatcherBackend::Builtin) {
    return match_builtin(image_a, image_b, matcher.features);
  }
  if (matcher.matches_dir.empty() || file_name.empty()) {
    fail(ErrorCode::BackendUnavailable, "matchinit", "external matcher needs a matches directory");
  }
  const auto path = matcher.matches_dir / file_name;
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::BackendUnavailable, "matchinit", "missing match file " + path.string());
  }
  return load_matches(path, ImageSize{image_a.width, image_a.height},
                      ImageSize{image_b.width, image_b.height});
}

namespace detail {

// splitmix64 step, used to derive independent per-stage seeds
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::optional<PnpResult> try_stage(const PointCloud& cloud, const ImageGray& camera_image,
                                          const CameraIntrinsics& K, const PoseSE3& render_pose,
                                          const RenderParams& render, const MatcherConfig& matcher,
                                          const std::string& file_name,
                                          const RansacParams& ransac, StageDiagnostics& diag) {
  try {
    const RenderedView view = render_view(cloud, K, render_pose, render);
    const MatchList matches = match_features(view.image, camera_image, matcher, file_name);
    diag.matches = matches.size();
    const auto corrs = lift_matches(matches, view);
    diag.lifted = corrs.size();
    PnpResult r = solve_pnp_ransac(corrs, K, ransac);
    diag.inliers = r.inliers.size();
    diag.rms_px = r.rms_px;
    diag.status = "ok";
    return r;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::InsufficientCorrespondences:
      case ErrorCode::NoConsensus:
      case ErrorCode::BackendUnavailable:
        diag.status = to_string(e.code());
        return std::nullopt;
      default:
        throw;
    }
  }
}

}  // namespace detail

/// Two-stage initial guess. Throws NoYawSucceeded when no sampled yaw reaches
/// `min_inliers` after RANSAC.
[[nodiscard]] inline InitialGuessResult estimate_initial_guess(
    const PointCloud& cloud, const ImageGray& camera_image, const CameraIntrinsics& K,
    const InitialGuessParams& params, const MatcherConfig& matcher = {},
    const RenderParams& render = {}) {
  params.validate();
  K.validate();
  if (camera_image.width != K.width || camera_image.height != K.height) {
    fail(ErrorCode::DimensionMismatch, "matchinit", "camera image size differs from intrinsics");
  }
  RansacParams ransac;
  ransac.threshold_px = params.ransac_threshold_px;
  ransac.max_iterations = params.ransac_iters;
  ransac.min_inliers = params.min_inliers;

  InitialGuessResult result;
  const auto poses = sample_yaw_poses(params);
  std::optional<PnpResult> rough;
  for (int k = 0; k < params.yaw_count && !rough; ++k) {
    StageDiagnostics diag;
    diag.stage = "yaw";
    diag.yaw_index = k;
    diag.yaw_deg = 360.0 * k / params.yaw_count;
    ransac.seed = detail::split_seed(params.seed, static_cast<std::uint64_t>(k));
    rough = detail::try_stage(cloud, camera_image, K, poses[k], render, matcher,
                              "yaw_" + std::to_string(k) + ".txt", ransac, diag);
    result.stages.push_back(diag);
  }
  if (!rough) {
    fail(ErrorCode::NoYawSucceeded, "matchinit",
         "none of " + std::to_string(params.yaw_count) + " yaw views reached " +
             std::to_string(params.min_inliers) + " inliers");
  }
  result.pose = rough->pose;
  result.inliers = rough->inliers.size();
  result.chosen_stage = "yaw";

  if (params.refine) {
    StageDiagnostics diag;
    diag.stage = "refine";
    ransac.seed = detail::split_seed(params.seed, static_cast<std::uint64_t>(params.yaw_count));
    const auto refined = detail::try_stage(cloud, camera_image, K, rough->pose, render, matcher,
                                           "refine.txt", ransac, diag);
    result.stages.push_back(diag);
    if (refined && refined->inliers.size() >= rough->inliers.size()) {
      result.pose = refined->pose;
      result.inliers = refined->inliers.size();
      result.chosen_stage = "refine";
    }
  }
  return result;
}

}  // namespace roadreg

#endif  // ROADREG_MATCHINIT_INITIAL_GUESS_HPP
