#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "roadreg/core/lie.hpp"
#include "roadreg/matchinit/initial_guess.hpp"
#include "support/synthetic_scene.hpp"

namespace roadreg {
namespace {

using testing::kDeg;

template <typename Fn>
ErrorCode error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

const CameraIntrinsics kK{500, 500, 320, 240, 640, 480};

PoseSE3 random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> N(0, 1);
  std::uniform_real_distribution<double> U(-3, 3);
  const Vec3 axis = Vec3(N(rng), N(rng), N(rng)).normalized();
  const double angle = std::uniform_real_distribution<double>(0, 3.0)(rng);
  return {exp_so3(axis * angle), Vec3(U(rng), U(rng), U(rng))};
}

std::vector<Correspondence2D3D> exact_corrs(const PoseSE3& T, int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-3, 3), uz(4, 12);
  std::vector<Correspondence2D3D> out;
  const PoseSE3 Tinv = T.inverse();
  while (static_cast<int>(out.size()) < n) {
    const Vec3 pc(ux(rng), ux(rng), uz(rng));
    const Vec2 px(kK.fx * pc.x() / pc.z() + kK.cx, kK.fy * pc.y() / pc.z() + kK.cy);
    if (!kK.contains(px.x(), px.y())) continue;
    out.push_back({px, Tinv * pc});
  }
  return out;
}

double rot_err(const PoseSE3& a, const PoseSE3& b) { return log_so3(a.R * b.R.transpose()).norm(); }

// -- yaw sampling -----------------------------------------------------------

TEST(YawSampling, EightUniformYaws) {
  InitialGuessParams p;
  p.rough_position = Vec3(1, 2, 6);
  const auto poses = sample_yaw_poses(p);
  ASSERT_EQ(poses.size(), 8u);
  for (int k = 0; k < 8; ++k) {
    EXPECT_LT((poses[k].center() - p.rough_position).norm(), 1e-12);
    const Vec3 fwd = poses[k].R.transpose().col(2);
    double yaw = std::atan2(fwd.y(), fwd.x()) / kDeg;
    if (yaw < -1e-9) yaw += 360;
    EXPECT_NEAR(yaw, 45.0 * k, 1e-9);
    EXPECT_NEAR(std::asin(fwd.z()) / kDeg, -10.0, 1e-9);
    // zero roll: camera x axis stays horizontal
    EXPECT_NEAR(poses[k].R.transpose().col(0).z(), 0.0, 1e-12);
  }
  p.yaw_count = 1;
  EXPECT_EQ(sample_yaw_poses(p).size(), 1u);
  p.yaw_count = 0;
  EXPECT_EQ(error_of([&] { (void)sample_yaw_poses(p); }), ErrorCode::ConfigError);
}

// -- feature matching -------------------------------------------------------

const testing::SyntheticScene& small_scene() {
  static const testing::SyntheticScene scene = [] {
    testing::SceneConfig cfg;
    cfg.seed = 11;
    cfg.width = 640;
    cfg.height = 360;
    return testing::SyntheticScene(cfg);
  }();
  return scene;
}

const ImageGray& small_camera_image() {
  static const ImageGray img = small_scene().render_camera_image();
  return img;
}

TEST(Features, SelfMatchRecoversDetectedCorners) {
  const ImageGray& img = small_camera_image();
  const FeatureSet f = detect_features(img);
  ASSERT_GT(f.size(), 100u);
  const MatchList m = match_feature_sets(f, f);
  const auto self = std::count_if(m.begin(), m.end(),
                                  [](const PixelMatch& p) { return (p.a - p.b).norm() <= 1.0; });
  EXPECT_GE(static_cast<double>(self), 0.9 * static_cast<double>(f.size()));
}

TEST(Features, ShiftedCopyGivesShiftDisplacement) {
  const ImageGray& img = small_camera_image();
  ImageGray shifted(img.width, img.height, 0.0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 10; x < img.width; ++x) shifted.at(x, y) = img.at(x - 10, y);
  const MatchList m = match_builtin(img, shifted);
  ASSERT_GT(m.size(), 50u);
  std::vector<double> dx, dy;
  for (const auto& p : m) {
    dx.push_back(p.b.x() - p.a.x());
    dy.push_back(p.b.y() - p.a.y());
  }
  std::nth_element(dx.begin(), dx.begin() + dx.size() / 2, dx.end());
  std::nth_element(dy.begin(), dy.begin() + dy.size() / 2, dy.end());
  EXPECT_NEAR(dx[dx.size() / 2], 10.0, 0.5);
  EXPECT_NEAR(dy[dy.size() / 2], 0.0, 0.5);
}

TEST(Features, BlankImagesGiveNoMatches) {
  EXPECT_TRUE(match_builtin(ImageGray(200, 100, 0.3), ImageGray(200, 100, 0.3)).empty());
}

TEST(Features, ExternalBackendValidatesFile) {
  const auto dir = std::filesystem::temp_directory_path() / "roadreg_match_ext";
  std::filesystem::create_directories(dir);
  MatcherConfig cfg;
  cfg.backend = MatcherBackend::ExternalFile;
  EXPECT_EQ(error_of([&] { (void)match_features(ImageGray(10, 10), ImageGray(10, 10), cfg, "yaw_0.txt"); }),
            ErrorCode::BackendUnavailable);
  cfg.matches_dir = dir;
  save_matches(dir / "yaw_0.txt", MatchList{{Vec2(1, 2), Vec2(3, 4)}});
  save_matches(dir / "yaw_1.txt", MatchList{{Vec2(1, 2), Vec2(30, 4)}});
  EXPECT_EQ(match_features(ImageGray(10, 10), ImageGray(10, 10), cfg, "yaw_0.txt").size(), 1u);
  EXPECT_EQ(error_of([&] { (void)match_features(ImageGray(10, 10), ImageGray(10, 10), cfg, "yaw_1.txt"); }),
            ErrorCode::BoundsError);
  std::filesystem::remove_all(dir);
}

// -- lifting ----------------------------------------------------------------

TEST(LiftMatches, HolesDroppedShadedKept) {
  RenderedView view;
  view.image = ImageGray(4, 4);
  view.valid.assign(16, 0);
  view.correspondence.assign(16, Vec3::Zero());
  view.valid[view.index(1, 2)] = 1;
  view.correspondence[view.index(1, 2)] = Vec3(7, 8, 9);
  const MatchList m{{Vec2(1.2, 1.9), Vec2(5, 6)}, {Vec2(3, 3), Vec2(1, 1)}};
  const auto c = lift_matches(m, view);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].pixel, Vec2(5, 6));
  EXPECT_EQ(c[0].point, Vec3(7, 8, 9));
}

// -- PnP --------------------------------------------------------------------

TEST(P3P, OneSolutionMatchesGeneratingPose) {
  std::mt19937_64 rng(3);
  const Mat3 Kinv = kK.matrix().inverse();
  for (int trial = 0; trial < 100; ++trial) {
    const PoseSE3 T = random_pose(rng);
    const auto c = exact_corrs(T, 3, rng);
    std::array<Vec3, 3> bearings, points;
    for (int i = 0; i < 3; ++i) {
      bearings[i] = (Kinv * Vec3(c[i].pixel.x(), c[i].pixel.y(), 1)).normalized();
      points[i] = c[i].point;
    }
    const auto sols = solve_p3p(bearings, points);
    double best = 1e9;
    for (const auto& s : sols) best = std::min(best, (s.t - T.t).norm() + rot_err(s, T));
    EXPECT_LT(best, 1e-6) << "trial " << trial;
  }
}

TEST(PnP, ExactCorrespondencesRecoverPose) {
  std::mt19937_64 rng(5);
  RansacParams p;
  p.min_inliers = 10;
  for (int trial = 0; trial < 100; ++trial) {
    const PoseSE3 T = random_pose(rng);
    const auto c = exact_corrs(T, 50, rng);
    const PnpResult r = solve_pnp_ransac(c, kK, p);
    EXPECT_LT((r.pose.t - T.t).norm(), 1e-4);
    EXPECT_LT(rot_err(r.pose, T), 1e-4);
    EXPECT_EQ(r.inliers.size(), 50u);
  }
}

TEST(PnP, OutliersRejected) {
  std::mt19937_64 rng(9);
  const PoseSE3 T = random_pose(rng);
  auto c = exact_corrs(T, 50, rng);
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480), uw(-20, 20);
  for (int i = 0; i < 20; ++i) c.push_back({Vec2(ux(rng), uy(rng)), Vec3(uw(rng), uw(rng), uw(rng))});
  const PnpResult r = solve_pnp_ransac(c, kK, {});
  std::vector<std::size_t> expected(50);
  std::iota(expected.begin(), expected.end(), std::size_t{0});
  EXPECT_EQ(r.inliers, expected);
  EXPECT_LT((r.pose.t - T.t).norm(), 1e-4);
}

TEST(PnP, InlierSetInvariantUnderShuffle) {
  std::mt19937_64 rng(21);
  const PoseSE3 T = random_pose(rng);
  auto c = exact_corrs(T, 40, rng);
  std::uniform_real_distribution<double> ux(0, 640), uy(0, 480), uw(-20, 20);
  for (int i = 0; i < 25; ++i) c.push_back({Vec2(ux(rng), uy(rng)), Vec3(uw(rng), uw(rng), uw(rng))});
  const PnpResult ref = solve_pnp_ransac(c, kK, {});
  std::vector<std::size_t> perm(c.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (int round = 0; round < 5; ++round) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Correspondence2D3D> shuffled;
    for (std::size_t i : perm) shuffled.push_back(c[i]);
    const PnpResult r = solve_pnp_ransac(shuffled, kK, {});
    std::vector<std::size_t> mapped;
    for (std::size_t i : r.inliers) mapped.push_back(perm[i]);
    std::sort(mapped.begin(), mapped.end());
    EXPECT_EQ(mapped, ref.inliers);
    EXPECT_EQ(r.pose.t, ref.pose.t);
  }
}

TEST(PnP, ErrorCases) {
  std::mt19937_64 rng(1);
  const auto c = exact_corrs(random_pose(rng), 3, rng);
  EXPECT_EQ(error_of([&] { (void)solve_pnp_ransac(c, kK, {}); }),
            ErrorCode::InsufficientCorrespondences);
  const auto c10 = exact_corrs(random_pose(rng), 10, rng);
  EXPECT_EQ(error_of([&] { (void)solve_pnp_ransac(c10, kK, {}); }), ErrorCode::NoConsensus);
}

// -- full initial guess -----------------------------------------------------

TEST(InitialGuess, ClosedLoopOnSyntheticScene) {
  const auto& scene = small_scene();
  InitialGuessParams p;
  p.rough_position = testing::perturbed_position(scene, 2.0, 7);
  const InitialGuessResult r = estimate_initial_guess(scene.cloud, small_camera_image(), scene.K, p);
  EXPECT_LT((r.pose.center() - scene.center).norm(), 0.1 * std::sqrt(3.0));
  EXPECT_LT(rot_err(r.pose, scene.pose), 0.5 * kDeg);
  EXPECT_GE(static_cast<int>(r.inliers), p.min_inliers);
  ASSERT_FALSE(r.stages.empty());
  EXPECT_EQ(r.stages.back().stage, "refine");
}

TEST(InitialGuess, ExternalMatchesReproduceBuiltin) {
  const auto& scene = small_scene();
  InitialGuessParams p;
  p.rough_position = testing::perturbed_position(scene, 2.0, 7);
  const InitialGuessResult builtin =
      estimate_initial_guess(scene.cloud, small_camera_image(), scene.K, p);

  // write what the builtin matcher sees into per-stage files
  const auto dir = std::filesystem::temp_directory_path() / "roadreg_ig_ext";
  std::filesystem::create_directories(dir);
  const auto poses = sample_yaw_poses(p);
  for (int k = 0; k < p.yaw_count; ++k) {
    const RenderedView v = render_view(scene.cloud, scene.K, poses[k]);
    save_matches(dir / ("yaw_" + std::to_string(k) + ".txt"), match_builtin(v.image, small_camera_image()));
  }
  PoseSE3 rough = builtin.pose;
  {
    // stage-1 pose is needed to regenerate the refine-stage matches
    InitialGuessParams once = p;
    once.refine = false;
    rough = estimate_initial_guess(scene.cloud, small_camera_image(), scene.K, once).pose;
  }
  const RenderedView v = render_view(scene.cloud, scene.K, rough);
  save_matches(dir / "refine.txt", match_builtin(v.image, small_camera_image()));

  MatcherConfig ext;
  ext.backend = MatcherBackend::ExternalFile;
  ext.matches_dir = dir;
  const InitialGuessResult r = estimate_initial_guess(scene.cloud, small_camera_image(), scene.K, p, ext);
  // match files store 17 significant digits, so poses agree to round-off
  EXPECT_LT((r.pose.t - builtin.pose.t).norm(), 1e-6);
  EXPECT_EQ(r.inliers, builtin.inliers);
  std::filesystem::remove_all(dir);
}

TEST(InitialGuess, FeaturelessImageFails) {
  const auto& scene = small_scene();
  InitialGuessParams p;
  p.rough_position = scene.center;
  const ImageGray blank(scene.K.width, scene.K.height, 0.5);
  EXPECT_EQ(error_of([&] { (void)estimate_initial_guess(scene.cloud, blank, scene.K, p); }),
            ErrorCode::NoYawSucceeded);
}

}  // namespace
}  // namespace roadreg
