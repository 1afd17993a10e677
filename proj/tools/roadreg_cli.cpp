// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// roadreg <render|init-guess|register|eval|overlay> [--config FILE] [overrides]

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "roadreg/pipeline/commands.hpp"

namespace {

using roadreg::PipelineConfig;

struct Overrides {
  std::optional<std::string> cloud, image, intrinsics, pose, init_pose, matches_dir, camera_mask,
      render_mask, est_pose, gt_pose, pairs, correspondence, output_dir, matcher, edge_backend;
  std::optional<std::vector<double>> rough_position;
  std::optional<int> workers, window;
  std::optional<double> xi;
  std::optional<std::uint64_t> seed;
};

void add_options(CLI::App& app, std::string& config_path, Overrides& o) {
  app.add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--cloud", o.cloud, "prior point cloud (.ply, .pcd, .xyz)");
  app.add_option("--image", o.image, "camera image (.pgm, .ppm, .png)");
  app.add_option("--intrinsics", o.intrinsics, "intrinsics JSON");
  app.add_option("--pose", o.pose, "view pose JSON (render, overlay)");
  app.add_option("--init-pose", o.init_pose, "start pose JSON, skips the initial guess");
  app.add_option("--matches-dir", o.matches_dir, "directory of external match files");
  app.add_option("--camera-mask", o.camera_mask, "camera edge mask (mask_file backend)");
  app.add_option("--render-mask", o.render_mask, "rendered-view edge mask");
  app.add_option("--est-pose", o.est_pose, "estimated pose JSON (eval)");
  app.add_option("--gt-pose", o.gt_pose, "ground truth pose JSON");
  app.add_option("--pairs", o.pairs, "ground distance pairs (eval)");
  app.add_option("--correspondence", o.correspondence, "correspondence sidecar (eval)");
  app.add_option("-o,--output-dir", o.output_dir, "output directory");
  app.add_option("--matcher", o.matcher, "builtin or external")
      ->check(CLI::IsMember({"builtin", "external"}));
  app.add_option("--edges", o.edge_backend, "builtin or mask_file")
      ->check(CLI::IsMember({"builtin", "mask_file"}));
  app.add_option("--rough-position", o.rough_position, "rough camera position x y z")
      ->expected(3);
  app.add_option("--workers", o.workers, "worker threads, 0 for all cores");
  app.add_option("--window", o.window, "render neighbor window (odd)");
  app.add_option("--xi", o.xi, "render foreground band [m]");
  app.add_option("--seed", o.seed, "RANSAC seed");
}

void apply(const Overrides& o, PipelineConfig& c) {
  auto& p = c.paths;
  auto set = [](const std::optional<std::string>& v, std::filesystem::path& out) {
    if (v) out = *v;
  };
  set(o.cloud, p.cloud);
  set(o.image, p.image);
  set(o.intrinsics, p.intrinsics);
  set(o.pose, p.pose);
  set(o.init_pose, p.init_pose);
  set(o.matches_dir, p.matches_dir);
  set(o.camera_mask, p.camera_mask);
  set(o.render_mask, p.render_mask);
  set(o.est_pose, p.est_pose);
  set(o.gt_pose, p.gt_pose);
  set(o.pairs, p.pairs);
  set(o.correspondence, p.correspondence);
  set(o.output_dir, p.output_dir);
  if (o.matcher) {
    c.matcher = *o.matcher == "external" ? roadreg::MatcherBackend::ExternalFile
                                         : roadreg::MatcherBackend::Builtin;
  }
  if (o.edge_backend) {
    c.edge_backend = *o.edge_backend == "mask_file" ? roadreg::EdgeBackend::MaskFile
                                                    : roadreg::EdgeBackend::Builtin;
  }
  if (o.rough_position) {
    const auto& v = *o.rough_position;
    c.init.rough_position = roadreg::Vec3(v[0], v[1], v[2]);
  }
  if (o.workers) c.workers = *o.workers;
  if (o.window) c.render.window = *o.window;
  if (o.xi) c.render.xi = *o.xi;
  if (o.seed) c.seed = *o.seed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Registers a prior point cloud to a roadside camera image."};
  app.require_subcommand(1);
  std::string config_path;
  Overrides overrides;
  const std::pair<roadreg::Command, const char*> commands[] = {
      {roadreg::Command::Render, "render the cloud at a pose with 2D-3D correspondence"},
      {roadreg::Command::InitGuess, "initial pose from feature matching and PnP"},
      {roadreg::Command::Register, "initial guess plus edge-based refinement"},
      {roadreg::Command::Eval, "pose and ground distance errors"},
      {roadreg::Command::Overlay, "draw rendered-map edges on the camera image"}};
  std::optional<roadreg::Command> chosen;
  for (const auto& [cmd, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(roadreg::to_string(cmd)), help);
    add_options(*sub, config_path, overrides);
    sub->callback([&chosen, cmd = cmd] { chosen = cmd; });
  }
  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig config;
    if (!config_path.empty()) config = roadreg::load_config(config_path);
    apply(overrides, config);
    const nlohmann::json d = roadreg::run_command(*chosen, config);
    nlohmann::json summary = d;
    summary.erase("params");
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const roadreg::Error& e) {
    std::cerr << "roadreg: " << e.what() << '\n';
    return roadreg::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "roadreg: " << e.what() << '\n';
    return 1;
  }
}
