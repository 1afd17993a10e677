// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// The command-line subcommands as library functions. Each writes its artifacts
// into paths.output_dir and returns the diagnostics it also saves there.

#ifndef ROADREG_PIPELINE_COMMANDS_HPP
#define ROADREG_PIPELINE_COMMANDS_HPP

#include <chrono>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "roadreg/io/artifacts.hpp"
#include "roadreg/io/image.hpp"
#include "roadreg/io/point_cloud_io.hpp"
#include "roadreg/matchinit/initial_guess.hpp"
#include "roadreg/metrics/metrics.hpp"
#include "roadreg/pipeline/config.hpp"
#include "roadreg/pipeline/register.hpp"
#include "roadreg/render/view_io.hpp"

namespace roadreg {

/// Process exit status for an error: 2 when the data gave the method nothing to
/// work with, 1 otherwise.
[[nodiscard]] inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoYawSucceeded:
    case ErrorCode::NoAssociations:
      return 2;
    default:
      return 1;
  }
}

namespace detail {

class Stopwatch {
 public:
  [[nodiscard]] double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline std::filesystem::path output_path(const PipelineConfig& c, const char* name) {
  std::filesystem::create_directories(c.paths.output_dir);
  return c.paths.output_dir / name;
}

inline CameraIntrinsics load_intrinsics(const std::filesystem::path& p) {
  return intrinsics_from_json(read_json_file(p));
}

inline nlohmann::json stages_json(const std::vector<StageDiagnostics>& stages) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : stages) {
    out.push_back({{"stage", s.stage},
                   {"yaw_index", s.yaw_index},
                   {"yaw_deg", s.yaw_deg},
                   {"matches", s.matches},
                   {"lifted", s.lifted},
                   {"inliers", s.inliers},
                   {"rms_px", s.rms_px},
                   {"status", s.status}});
  }
  return out;
}

inline nlohmann::json pass_json(const RefinePass& p) {
  const auto& r = p.result;
  return {{"name", p.name},
          {"sigma", p.sigma},
          {"camera_edges", p.camera_edges},
          {"render_edges", p.render_edges},
          {"edge_points_3d", p.edge_points_3d},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"accepted_steps", r.steps.size()},
          {"residual_rms_px", r.residual_rms},
          {"active", r.active},
          {"gate_px", r.gate_px}};
}

inline nlohmann::json pose_error_json(const PoseError& e) {
  return {{"trans_err_m", e.trans_err_m},
          {"rot_err_deg", e.rot_err_deg},
          {"geodesic_deg", e.geodesic_deg}};
}

inline std::vector<Vec2> project_all(const CameraIntrinsics& K, const PoseSE3& T,
                                     std::span<const Vec3> points) {
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const Vec3& p : points) {
    if (const auto q = try_project(K, T, p)) out.push_back(q->pixel);
  }
  return out;
}

inline RenderedView view_from_map(const CorrespondenceMap& map, const CameraIntrinsics& K) {
  if (map.width != K.width || map.height != K.height) {
    fail(ErrorCode::DimensionMismatch, "metrics", "sidecar size differs from intrinsics");
  }
  RenderedView v;
  v.intrinsics = K;
  v.image = ImageGray(map.width, map.height);
  v.valid = map.valid;
  v.correspondence = map.points;
  v.depth.assign(map.valid.size(), 0.0);
  return v;
}

}  // namespace detail

/// Reads "u1 v1 u2 v2 distance" lines; '#' starts a comment.
[[nodiscard]] inline std::vector<DistancePair> load_distance_pairs(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "metrics", "cannot open " + path.string());
  std::vector<DistancePair> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ss(line);
    DistancePair p;
    double u1, v1, u2, v2;
    if (!(ss >> u1)) continue;
    std::string extra;
    if (!(ss >> v1 >> u2 >> v2 >> p.distance) || (ss >> extra) || !(p.distance > 0)) {
      fail(ErrorCode::ParseError, "metrics",
           path.string() + ":" + std::to_string(lineno) + ": expected u1 v1 u2 v2 distance");
    }
    p.a = Vec2(u1, v1);
    p.b = Vec2(u2, v2);
    pairs.push_back(p);
  }
  return pairs;
}

inline void save_distance_pairs(const std::filesystem::path& path,
                                std::span<const DistancePair> pairs) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "metrics", "cannot write " + path.string());
  out.precision(17);
  for (const auto& p : pairs) {
    out << p.a.x() << ' ' << p.a.y() << ' ' << p.b.x() << ' ' << p.b.y() << ' ' << p.distance
        << '\n';
  }
}

/// render.pgm and its correspondence sidecar render.rrcm.
inline nlohmann::json cmd_render(const PipelineConfig& c) {
  validate_config(c, Command::Render);
  detail::Stopwatch sw;
  CloudLoadReport report;
  const PointCloud cloud = load_point_cloud(c.paths.cloud, CloudFormat::Auto, &report);
  const CameraIntrinsics K = detail::load_intrinsics(c.paths.intrinsics);
  const PoseSE3 T = load_pose(c.paths.pose);
  const double t_load = sw.lap();
  const RenderedView view = render_view(cloud, K, T, c.render_params());
  const double t_render = sw.lap();
  save_pgm(detail::output_path(c, "render.pgm"), view.image);
  save_correspondence_sidecar(detail::output_path(c, "render.rrcm"), view);
  nlohmann::json d = {{"command", "render"},
                      {"points", cloud.size()},
                      {"dropped_non_finite", report.dropped_non_finite},
                      {"shaded_pixels", view.shaded_count()},
                      {"pixels", view.valid.size()},
                      {"workers", c.render_params().workers},
                      {"timings_s", {{"load", t_load}, {"render", t_render}}},
                      {"params", config_to_json(c)}};
  write_json_file(detail::output_path(c, "render.json"), d);
  return d;
}

/// init_pose.json plus per-stage diagnostics in init_guess.json.
inline nlohmann::json cmd_init_guess(const PipelineConfig& c) {
  validate_config(c, Command::InitGuess);
  detail::Stopwatch sw;
  const PointCloud cloud = load_point_cloud(c.paths.cloud);
  const ImageGray image = load_image(c.paths.image);
  const CameraIntrinsics K = detail::load_intrinsics(c.paths.intrinsics);
  const double t_load = sw.lap();
  const InitialGuessResult ig =
      estimate_initial_guess(cloud, image, K, c.init_params(), c.matcher_config(), c.render_params());
  const double t_init = sw.lap();
  save_pose(detail::output_path(c, "init_pose.json"), ig.pose);
  nlohmann::json d = {{"command", "init-guess"},
                      {"points", cloud.size()},
                      {"inliers", ig.inliers},
                      {"chosen_stage", ig.chosen_stage},
                      {"stages", detail::stages_json(ig.stages)},
                      {"pose", pose_to_json(ig.pose)},
                      {"timings_s", {{"load", t_load}, {"init_guess", t_init}}},
                      {"params", config_to_json(c)}};
  write_json_file(detail::output_path(c, "init_guess.json"), d);
  return d;
}

/// pose.json, registration.json and overlay.ppm. Starts from paths.init_pose
/// when given, otherwise from a fresh initial guess.
inline nlohmann::json cmd_register(const PipelineConfig& c) {
  validate_config(c, Command::Register);
  detail::Stopwatch sw;
  const PointCloud cloud = load_point_cloud(c.paths.cloud);
  const ImageGray image = load_image(c.paths.image);
  const CameraIntrinsics K = detail::load_intrinsics(c.paths.intrinsics);
  std::optional<EdgeMask> camera_mask, render_mask;
  if (c.edge_backend == EdgeBackend::MaskFile) {
    camera_mask = load_edge_mask(c.paths.camera_mask);
    if (!c.paths.render_mask.empty()) render_mask = load_edge_mask(c.paths.render_mask);
  }
  const double t_load = sw.lap();

  nlohmann::json d = {{"command", "register"}, {"points", cloud.size()}};
  PoseSE3 initial;
  double t_init = 0.0;
  if (!c.paths.init_pose.empty()) {
    initial = load_pose(c.paths.init_pose);
    d["initial_source"] = "file";
  } else {
    const InitialGuessResult ig = estimate_initial_guess(cloud, image, K, c.init_params(),
                                                         c.matcher_config(), c.render_params());
    t_init = sw.lap();
    initial = ig.pose;
    d["initial_source"] = "init_guess";
    d["init_guess"] = {{"inliers", ig.inliers},
                       {"chosen_stage", ig.chosen_stage},
                       {"stages", detail::stages_json(ig.stages)}};
  }

  RefineParams rp;
  rp.render = c.render_params();
  rp.backend = c.edge_backend;
  rp.edges = c.edges;
  rp.coarse_sigma = c.coarse_sigma;
  rp.optim = c.optim_params();
  const RefineResult reg = refine_extrinsics(cloud, image, K, initial, rp,
                                             camera_mask ? &*camera_mask : nullptr,
                                             render_mask ? &*render_mask : nullptr);
  const double t_refine = sw.lap();

  save_pose(detail::output_path(c, "pose.json"), reg.pose);
  save_overlay(detail::output_path(c, "overlay.ppm"), image,
               detail::project_all(K, reg.pose, reg.edge_points.points));
  d["initial_pose"] = pose_to_json(initial);
  d["pose"] = pose_to_json(reg.pose);
  d["shaded_pixels"] = reg.view.shaded_count();
  d["passes"] = nlohmann::json::array();
  for (const auto& p : reg.passes) d["passes"].push_back(detail::pass_json(p));
  if (!c.paths.gt_pose.empty()) {
    const PoseSE3 gt = load_pose(c.paths.gt_pose);
    d["initial_error"] = detail::pose_error_json(pose_error(initial, gt));
    d["final_error"] = detail::pose_error_json(pose_error(reg.pose, gt));
  }
  d["workers"] = c.optim_params().workers;
  d["timings_s"] = {{"load", t_load}, {"init_guess", t_init}, {"refine", t_refine}};
  d["params"] = config_to_json(c);
  write_json_file(detail::output_path(c, "registration.json"), d);
  return d;
}

/// metrics.json: pose error against paths.gt_pose and/or ground distance
/// errors of paths.pairs measured in the view rendered at paths.est_pose.
inline nlohmann::json cmd_eval(const PipelineConfig& c) {
  validate_config(c, Command::Eval);
  const PoseSE3 est = load_pose(c.paths.est_pose);
  nlohmann::json d = {{"command", "eval"}};
  if (!c.paths.gt_pose.empty()) {
    const PoseSE3 gt = load_pose(c.paths.gt_pose);
    d["pose_error"] = detail::pose_error_json(pose_error(est, gt));
  }
  if (!c.paths.pairs.empty()) {
    const auto pairs = load_distance_pairs(c.paths.pairs);
    RenderedView view;
    if (!c.paths.correspondence.empty()) {
      const CorrespondenceMap map = load_correspondence_sidecar(c.paths.correspondence);
      CameraIntrinsics K{1, 1, 0, 0, map.width, map.height};
      if (!c.paths.intrinsics.empty()) K = detail::load_intrinsics(c.paths.intrinsics);
      view = detail::view_from_map(map, K);
    } else {
      const PointCloud cloud = load_point_cloud(c.paths.cloud);
      view = render_view(cloud, detail::load_intrinsics(c.paths.intrinsics), est,
                         c.render_params());
    }
    const DistanceError e = ground_distance_errors(pairs, view);
    d["distance_error"] = {{"pairs", pairs.size()},
                           {"max_pct", e.max_pct},
                           {"median_pct", e.median_pct},
                           {"rmse_pct", e.rmse_pct},
                           {"r", e.r},
                           {"d_est", e.d_est}};
  }
  d["params"] = config_to_json(c);
  write_json_file(detail::output_path(c, "metrics.json"), d);
  return d;
}

/// overlay.ppm: edges of the map rendered at paths.pose, drawn on the camera image.
inline nlohmann::json cmd_overlay(const PipelineConfig& c) {
  validate_config(c, Command::Overlay);
  const PointCloud cloud = load_point_cloud(c.paths.cloud);
  const ImageGray image = load_image(c.paths.image);
  const CameraIntrinsics K = detail::load_intrinsics(c.paths.intrinsics);
  const PoseSE3 T = load_pose(c.paths.pose);
  const RenderedView view = render_view(cloud, K, T, c.render_params());
  const EdgeSet3D pts = lift_edges_3d(extract_edges_2d(view.image, EdgeBackend::Builtin,
                                                       nullptr, c.edges),
                                      view, c.edges.depth_gap);
  const auto projected = detail::project_all(K, T, pts.points);
  save_overlay(detail::output_path(c, "overlay.ppm"), image, projected);
  nlohmann::json d = {{"command", "overlay"},
                      {"edge_points", projected.size()},
                      {"params", config_to_json(c)}};
  write_json_file(detail::output_path(c, "overlay.json"), d);
  return d;
}

[[nodiscard]] inline nlohmann::json run_command(Command cmd, const PipelineConfig& c) {
  switch (cmd) {
    case Command::Render: return cmd_render(c);
    case Command::InitGuess: return cmd_init_guess(c);
    case Command::Register: return cmd_register(c);
    case Command::Eval: return cmd_eval(c);
    case Command::Overlay: return cmd_overlay(c);
  }
  fail(ErrorCode::ConfigError, "cli", "unknown command");
}

}  // namespace roadreg

#endif  // ROADREG_PIPELINE_COMMANDS_HPP
