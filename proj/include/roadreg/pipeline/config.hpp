// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Pipeline configuration: one JSON document with a section per module. Unknown
// keys and out-of-range values are rejected with the offending field's path.

#ifndef ROADREG_PIPELINE_CONFIG_HPP
#define ROADREG_PIPELINE_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "roadreg/core/error.hpp"
#include "roadreg/edges/edges.hpp"
#include "roadreg/io/artifacts.hpp"
#include "roadreg/matchinit/initial_guess.hpp"
#include "roadreg/optim/optimizer.hpp"
#include "roadreg/render/neighbor_render.hpp"

namespace roadreg {

enum class Command { Render, InitGuess, Register, Eval, Overlay };

[[nodiscard]] inline std::string_view to_string(Command c) {
  switch (c) {
    case Command::Render: return "render";
    case Command::InitGuess: return "init-guess";
    case Command::Register: return "register";
    case Command::Eval: return "eval";
    case Command::Overlay: return "overlay";
  }
  return "unknown";
}

struct PipelinePaths {
  std::filesystem::path cloud;
  std::filesystem::path image;           // camera image
  std::filesystem::path intrinsics;      // JSON
  std::filesystem::path pose;            // view pose for render / overlay
  std::filesystem::path init_pose;       // register: skip the initial guess
  std::filesystem::path matches_dir;     // external matcher files
  std::filesystem::path camera_mask;     // mask_file edges of the camera image
  std::filesystem::path render_mask;     // mask_file edges of the rendered view
  std::filesystem::path est_pose;        // eval
  std::filesystem::path gt_pose;         // eval
  std::filesystem::path pairs;           // eval: "u1 v1 u2 v2 d" per line
  std::filesystem::path correspondence;  // eval: sidecar instead of rendering
  std::filesystem::path output_dir = ".";
};

struct PipelineConfig {
  PipelinePaths paths;
  // wider foreground band than the renderer's default: on grazing ground a
  // 0.1 m band holds about one pixel row, which shifts texture by ~1.5 px
  RenderParams render{.window = 5, .xi = 2.0};
  InitialGuessParams init;
  MatcherBackend matcher = MatcherBackend::Builtin;
  FeatureParams features;
  EdgeBackend edge_backend = EdgeBackend::Builtin;
  EdgeParams edges;
  double coarse_sigma = 8.0;  // smoothing of the coarse refinement pass; 0 skips it
  OptimizeParams optim;
  std::uint64_t seed = 42;
  int workers = 1;  // 0: one per hardware thread; ROADREG_WORKERS overrides

  /// Module parameters with the worker count and seed applied.
  [[nodiscard]] RenderParams render_params() const {
    RenderParams p = render;
    p.workers = resolve_workers(workers);
    return p;
  }
  [[nodiscard]] OptimizeParams optim_params() const {
    OptimizeParams p = optim;
    p.workers = resolve_workers(workers);
    return p;
  }
  [[nodiscard]] InitialGuessParams init_params() const {
    InitialGuessParams p = init;
    p.seed = seed;
    return p;
  }
  [[nodiscard]] MatcherConfig matcher_config() const {
    MatcherConfig m;
    m.backend = matcher;
    m.matches_dir = paths.matches_dir;
    m.features = features;
    m.features.workers = resolve_workers(workers);
    return m;
  }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::ConfigError, "cli", field + ": " + what);
}

/// Reads the members of one JSON object, remembering which keys were used so
/// leftovers can be reported.
class Section {
 public:
  Section(const nlohmann::json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) config_error(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_unsigned() == false && v.get<std::int64_t>() < 0) {
            throw std::invalid_argument("expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("expected a number");
      } else {
        if (!v.is_string()) throw std::invalid_argument("expected a string");
      }
      out = v.get<T>();
    } catch (const std::exception& e) {
      config_error(field(key), e.what());
    }
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  void get_vec3(const char* key, Vec3& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) config_error(field(key), "expected [x, y, z]");
    for (int i = 0; i < 3; ++i) {
      if (!v[i].is_number()) config_error(field(key), "expected [x, y, z]");
      out[i] = v[i].get<double>();
    }
  }

  [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

  [[nodiscard]] Section child(const char* key) {
    used_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) config_error(field(k.c_str()), "unknown field");
    }
  }

  [[nodiscard]] std::string field(const char* key) const {
    return prefix_.empty() ? std::string(key) : prefix_ + "." + key;
  }

 private:
  const nlohmann::json& j_;
  std::string prefix_;
  std::set<std::string> used_;
};

}  // namespace detail

/// Parses a configuration document; absent fields keep their defaults.
[[nodiscard]] inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  detail::Section root(j, "");
  {
    auto s = root.child("paths");
    auto& p = c.paths;
    s.get_path("cloud", p.cloud);
    s.get_path("image", p.image);
    s.get_path("intrinsics", p.intrinsics);
    s.get_path("pose", p.pose);
    s.get_path("init_pose", p.init_pose);
    s.get_path("matches_dir", p.matches_dir);
    s.get_path("camera_mask", p.camera_mask);
    s.get_path("render_mask", p.render_mask);
    s.get_path("est_pose", p.est_pose);
    s.get_path("gt_pose", p.gt_pose);
    s.get_path("pairs", p.pairs);
    s.get_path("correspondence", p.correspondence);
    s.get_path("output_dir", p.output_dir);
    s.finish();
  }
  {
    auto s = root.child("render");
    s.get("window", c.render.window);
    s.get("xi", c.render.xi);
    s.get("min_foreground", c.render.min_foreground);
    s.finish();
  }
  {
    auto s = root.child("init_guess");
    auto& g = c.init;
    s.get_vec3("rough_position", g.rough_position);
    s.get("pitch_deg", g.pitch_deg);
    s.get("roll_deg", g.roll_deg);
    s.get("yaw_count", g.yaw_count);
    s.get("min_inliers", g.min_inliers);
    s.get("ransac_threshold_px", g.ransac_threshold_px);
    s.get("ransac_iters", g.ransac_iters);
    s.get("refine", g.refine);
    std::string matcher = "builtin";
    s.get("matcher", matcher);
    if (matcher == "builtin") {
      c.matcher = MatcherBackend::Builtin;
    } else if (matcher == "external") {
      c.matcher = MatcherBackend::ExternalFile;
    } else {
      detail::config_error("init_guess.matcher", "expected \"builtin\" or \"external\"");
    }
    auto f = s.child("features");
    f.get("levels", c.features.levels);
    f.get("level_scale", c.features.level_scale);
    f.get("quality", c.features.quality);
    f.get("nms_radius", c.features.nms_radius);
    f.get("cell_size", c.features.cell_size);
    f.get("per_cell", c.features.per_cell);
    f.get("max_per_level", c.features.max_per_level);
    f.get("ratio", c.features.ratio);
    f.get("duplicate_radius", c.features.duplicate_radius);
    f.finish();
    s.finish();
  }
  {
    auto s = root.child("edges");
    std::string backend = "builtin";
    s.get("backend", backend);
    if (backend == "builtin") {
      c.edge_backend = EdgeBackend::Builtin;
    } else if (backend == "mask_file") {
      c.edge_backend = EdgeBackend::MaskFile;
    } else {
      detail::config_error("edges.backend", "expected \"builtin\" or \"mask_file\"");
    }
    s.get("sigma", c.edges.sigma);
    s.get("high_percentile", c.edges.high_percentile);
    s.get("low_percentile", c.edges.low_percentile);
    s.get("subpixel", c.edges.subpixel);
    s.get("depth_gap", c.edges.depth_gap);
    s.get("spacing", c.edges.spacing);
    s.get("coarse_sigma", c.coarse_sigma);
    s.finish();
  }
  {
    auto s = root.child("optim");
    auto& o = c.optim;
    s.get("M", o.M);
    s.get("max_iterations", o.max_iterations);
    s.get("max_inner", o.max_inner);
    s.get("lambda_init", o.lambda_init);
    s.get("convergence_tol", o.convergence_tol);
    s.get("huber_delta_px", o.huber_delta_px);
    s.get("max_assoc_dist_px", o.max_assoc_dist_px);
    s.get("min_assoc_dist_px", o.min_assoc_dist_px);
    s.get("gate_sigmas", o.gate_sigmas);
    s.get("max_translation_m", o.max_translation_m);
    s.finish();
  }
  root.get("seed", c.seed);
  root.get("workers", c.workers);
  root.finish();
  return c;
}

[[nodiscard]] inline nlohmann::json config_to_json(const PipelineConfig& c) {
  using nlohmann::json;
  const auto& p = c.paths;
  json j;
  j["paths"] = {{"cloud", p.cloud.string()},
                {"image", p.image.string()},
                {"intrinsics", p.intrinsics.string()},
                {"pose", p.pose.string()},
                {"init_pose", p.init_pose.string()},
                {"matches_dir", p.matches_dir.string()},
                {"camera_mask", p.camera_mask.string()},
                {"render_mask", p.render_mask.string()},
                {"est_pose", p.est_pose.string()},
                {"gt_pose", p.gt_pose.string()},
                {"pairs", p.pairs.string()},
                {"correspondence", p.correspondence.string()},
                {"output_dir", p.output_dir.string()}};
  j["render"] = {{"window", c.render.window},
                 {"xi", c.render.xi},
                 {"min_foreground", c.render.min_foreground}};
  const auto& g = c.init;
  const auto& f = c.features;
  j["init_guess"] = {
      {"rough_position", {g.rough_position.x(), g.rough_position.y(), g.rough_position.z()}},
      {"pitch_deg", g.pitch_deg},
      {"roll_deg", g.roll_deg},
      {"yaw_count", g.yaw_count},
      {"min_inliers", g.min_inliers},
      {"ransac_threshold_px", g.ransac_threshold_px},
      {"ransac_iters", g.ransac_iters},
      {"refine", g.refine},
      {"matcher", c.matcher == MatcherBackend::Builtin ? "builtin" : "external"},
      {"features",
       {{"levels", f.levels},
        {"level_scale", f.level_scale},
        {"quality", f.quality},
        {"nms_radius", f.nms_radius},
        {"cell_size", f.cell_size},
        {"per_cell", f.per_cell},
        {"max_per_level", f.max_per_level},
        {"ratio", f.ratio},
        {"duplicate_radius", f.duplicate_radius}}}};
  j["edges"] = {{"backend", c.edge_backend == EdgeBackend::Builtin ? "builtin" : "mask_file"},
                {"sigma", c.edges.sigma},
                {"high_percentile", c.edges.high_percentile},
                {"low_percentile", c.edges.low_percentile},
                {"subpixel", c.edges.subpixel},
                {"depth_gap", c.edges.depth_gap},
                {"spacing", c.edges.spacing},
                {"coarse_sigma", c.coarse_sigma}};
  const auto& o = c.optim;
  j["optim"] = {{"M", o.M},
                {"max_iterations", o.max_iterations},
                {"max_inner", o.max_inner},
                {"lambda_init", o.lambda_init},
                {"convergence_tol", o.convergence_tol},
                {"huber_delta_px", o.huber_delta_px},
                {"max_assoc_dist_px", o.max_assoc_dist_px},
                {"min_assoc_dist_px", o.min_assoc_dist_px},
                {"gate_sigmas", o.gate_sigmas},
                {"max_translation_m", o.max_translation_m}};
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  return j;
}

[[nodiscard]] inline PipelineConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path));
}

namespace detail {

inline void require_file(const std::filesystem::path& p, const char* field) {
  if (p.empty()) config_error(std::string("paths.") + field, "required for this command");
  if (!std::filesystem::is_regular_file(p)) {
    fail(ErrorCode::ConfigError, "cli",
         std::string("paths.") + field + ": file not found: " + p.string());
  }
}

inline void check_optional_file(const std::filesystem::path& p, const char* field) {
  if (!p.empty() && !std::filesystem::is_regular_file(p)) {
    fail(ErrorCode::ConfigError, "cli",
         std::string("paths.") + field + ": file not found: " + p.string());
  }
}

/// Runs a module's own validate() and prefixes its message with the section.
template <typename P>
void validate_section(const P& params, const char* section) {
  try {
    params.validate();
  } catch (const Error& e) {
    config_error(section, e.what());
  }
}

}  // namespace detail

/// Checks parameter ranges and that every path the command reads exists.
inline void validate_config(const PipelineConfig& c, Command cmd) {
  detail::validate_section(c.render, "render");
  detail::validate_section(c.init, "init_guess");
  detail::validate_section(c.features, "init_guess.features");
  detail::validate_section(c.edges, "edges");
  detail::validate_section(c.optim, "optim");
  if (c.coarse_sigma < 0) detail::config_error("edges.coarse_sigma", "must be >= 0");
  if (c.workers < 0) detail::config_error("workers", "must be >= 0");

  const auto& p = c.paths;
  switch (cmd) {
    case Command::Render:
      detail::require_file(p.cloud, "cloud");
      detail::require_file(p.intrinsics, "intrinsics");
      detail::require_file(p.pose, "pose");
      break;
    case Command::InitGuess:
    case Command::Register:
      detail::require_file(p.cloud, "cloud");
      detail::require_file(p.image, "image");
      detail::require_file(p.intrinsics, "intrinsics");
      if (cmd == Command::Register) detail::check_optional_file(p.init_pose, "init_pose");
      if (c.matcher == MatcherBackend::ExternalFile &&
          (cmd == Command::InitGuess || p.init_pose.empty())) {
        if (p.matches_dir.empty() || !std::filesystem::is_directory(p.matches_dir)) {
          detail::config_error("paths.matches_dir", "directory required by the external matcher");
        }
      }
      if (cmd == Command::Register && c.edge_backend == EdgeBackend::MaskFile) {
        detail::require_file(p.camera_mask, "camera_mask");
        detail::check_optional_file(p.render_mask, "render_mask");
      }
      break;
    case Command::Eval:
      if (p.gt_pose.empty() && p.pairs.empty()) {
        detail::config_error("paths", "eval needs gt_pose and/or pairs");
      }
      detail::require_file(p.est_pose, "est_pose");
      detail::check_optional_file(p.gt_pose, "gt_pose");
      if (!p.pairs.empty()) {
        detail::require_file(p.pairs, "pairs");
        if (p.correspondence.empty()) {
          detail::require_file(p.cloud, "cloud");
          detail::require_file(p.intrinsics, "intrinsics");
        } else {
          detail::require_file(p.correspondence, "correspondence");
        }
      }
      break;
    case Command::Overlay:
      detail::require_file(p.cloud, "cloud");
      detail::require_file(p.image, "image");
      detail::require_file(p.intrinsics, "intrinsics");
      detail::require_file(p.pose, "pose");
      break;
  }
}

}  // namespace roadreg

#endif  // ROADREG_PIPELINE_CONFIG_HPP
