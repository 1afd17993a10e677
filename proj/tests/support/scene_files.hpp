// Writes a synthetic scene to disk in the formats the command-line tool reads.

#ifndef ROADREG_TESTS_SCENE_FILES_HPP
#define ROADREG_TESTS_SCENE_FILES_HPP

#include <filesystem>
#include <string>

#include "roadreg/io/artifacts.hpp"
#include "roadreg/io/point_cloud_io.hpp"
#include "roadreg/pipeline/commands.hpp"
#include "support/synthetic_scene.hpp"

namespace roadreg::testing {

struct SceneFiles {
  std::filesystem::path dir, cloud, image, intrinsics, gt_pose, pairs;
};

inline SceneFiles write_scene_files(const SyntheticScene& scene, const std::filesystem::path& dir,
                                    std::size_t pair_count = 0, int clearance_px = 3) {
  std::filesystem::create_directories(dir);
  SceneFiles f{dir, dir / "cloud.ply", dir / "camera.pgm", dir / "intrinsics.json",
               dir / "gt_pose.json", {}};
  save_point_cloud_ply(f.cloud, scene.cloud);
  save_pgm(f.image, scene.render_camera_image());
  write_json_file(f.intrinsics, intrinsics_to_json(scene.K));
  save_pose(f.gt_pose, scene.pose);
  if (pair_count > 0) {
    f.pairs = dir / "pairs.txt";
    save_distance_pairs(f.pairs, ground_marker_pairs(scene, pair_count, clearance_px, scene.config.seed));
  }
  return f;
}

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("roadreg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace roadreg::testing

#endif  // ROADREG_TESTS_SCENE_FILES_HPP
