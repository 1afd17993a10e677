// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>

#include <unsupported/Eigen/MatrixFunctions>

#include "roadreg/core/lie.hpp"
#include "roadreg/edges/edges.hpp"
#include "roadreg/matchinit/pnp.hpp"
#include "roadreg/metrics/metrics.hpp"
#include "roadreg/pipeline/commands.hpp"
#include "roadreg/pipeline/register.hpp"
#include "roadreg/render/neighbor_render.hpp"
#include "support/scene_files.hpp"

namespace {

using namespace roadreg;
using roadreg::testing::kDeg;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every shaded pixel of every view checked so far reprojects within 0.51 px.
struct CorrespondenceAudit {
  std::size_t views = 0, shaded = 0, violations = 0;
  double worst = 0.0;

  void check(const RenderedView& v) {
    ++views;
    for (int y = 0; y < v.height(); ++y) {
      for (int x = 0; x < v.width(); ++x) {
        if (!v.has(x, y)) continue;
        ++shaded;
        const auto p = try_project(v.intrinsics, v.pose, v.point(x, y));
        const double e = p ? (p->pixel - Vec2(x, y)).norm() : 1e9;
        worst = std::max(worst, e);
        if (!(e <= 0.51) || !(v.depth[v.index(x, y)] > 0)) ++violations;
      }
    }
  }
};
CorrespondenceAudit g_audit;

PoseSE3 perturb(const PoseSE3& T, double trans, double rot_deg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1, 1);
  PoseSE3 out = T;
  out.R = T.R * exp_so3(Vec3(U(rng), U(rng), U(rng)) * rot_deg * kDeg);
  out.t = -(out.R * (T.center() + Vec3(U(rng), U(rng), U(rng)) * trans));
  return out;
}

PipelineConfig pipeline_config(const roadreg::testing::SceneFiles& f, const Vec3& rough,
                               const std::filesystem::path& out, int workers) {
  PipelineConfig c;
  c.paths.cloud = f.cloud;
  c.paths.image = f.image;
  c.paths.intrinsics = f.intrinsics;
  c.paths.gt_pose = f.gt_pose;
  c.paths.output_dir = out;
  c.init.rough_position = rough;
  c.workers = workers;
  return c;
}

// -- AC1, AC7, AC8 (estimated pose) -------------------------------------------

struct PipelineOutcome {
  bool ground_ok = true;
  double worst_median_pct = 0.0;
};

PipelineOutcome full_pipeline() {
  const std::filesystem::path root = roadreg::testing::scratch_dir("acceptance_pipeline");
  bool ok1 = true, ok8 = true, ok7 = true;
  double worst_t = 0, worst_r = 0, worst_time = 0, worst_median = 0;
  std::size_t min_pts = SIZE_MAX, max_pts = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    roadreg::testing::SceneConfig cfg;
    cfg.seed = seed;
    const roadreg::testing::SyntheticScene scene(cfg);
    const auto dir = root / ("scene" + std::to_string(seed));
    const auto files = roadreg::testing::write_scene_files(scene, dir);
    const Vec3 rough = roadreg::testing::perturbed_position(scene, 2.0, seed);
    const PipelineConfig c = pipeline_config(files, rough, dir / "w1", 1);

    const auto t0 = Clock::now();
    bool ran = true;
    try {
      (void)cmd_register(c);
    } catch (const Error& e) {
      std::printf("  scene %llu: register failed: %s\n", static_cast<unsigned long long>(seed), e.what());
      ran = false;
    }
    const double elapsed = seconds_since(t0);
    if (!ran) {
      ok1 = ok8 = false;
      continue;
    }
    const PoseSE3 est = load_pose(dir / "w1" / "pose.json");
    const PoseError e = pose_error(est, scene.pose);
    const bool in_range = scene.cloud.size() >= 50000 && scene.cloud.size() <= 500000;
    const bool pass = e.trans_err_m < 0.05 && e.rot_err_deg < 0.1 && elapsed < 60.0 && in_range;
    std::printf("  scene %llu: %zu points, rough offset %.2f m, error %.4f m / %.4f deg, %.1f s\n",
                static_cast<unsigned long long>(seed), scene.cloud.size(),
                (rough - scene.center).norm(), e.trans_err_m, e.rot_err_deg, elapsed);
    ok1 = ok1 && pass;
    worst_t = std::max(worst_t, e.trans_err_m);
    worst_r = std::max(worst_r, e.rot_err_deg);
    worst_time = std::max(worst_time, elapsed);
    min_pts = std::min(min_pts, scene.cloud.size());
    max_pts = std::max(max_pts, scene.cloud.size());

    // ground distances measured in the view rendered at the estimated pose
    const RenderedView view = render_view(scene.cloud, scene.K, est, c.render_params());
    g_audit.check(view);
    const auto pairs = roadreg::testing::ground_marker_pairs(scene, 20, 3, 100 + seed);
    const DistanceError de = ground_distance_errors(pairs, view);
    ok8 = ok8 && de.median_pct < 2.0;
    worst_median = std::max(worst_median, de.median_pct);

    if (seed == 1) {
      PipelineConfig c8 = c;
      c8.workers = 8;
      c8.paths.output_dir = dir / "w8";
      try {
        (void)cmd_register(c8);
        ok7 = slurp(dir / "w1" / "pose.json") == slurp(dir / "w8" / "pose.json") &&
              !slurp(dir / "w1" / "pose.json").empty();
      } catch (const Error& e) {
        std::printf("  determinism run failed: %s\n", e.what());
        ok7 = false;
      }
    }
  }
  report("AC1", ok1,
         fmt("5 scenes (%zu-%zu points), rough position +-2 m: worst error %.4f m / %.4f deg "
             "(limits 0.05 m / 0.1 deg), worst runtime %.1f s single-threaded (limit 60 s)",
             min_pts, max_pts, worst_t, worst_r, worst_time));
  report("AC7", ok7, "cmd_register pose.json with workers=1 and workers=8 is byte-identical");
  return {ok8, worst_median};
}

// -- AC2 ------------------------------------------------------------------------

void perturbation_robustness() {
  std::vector<std::unique_ptr<roadreg::testing::SyntheticScene>> scenes;
  std::vector<ImageGray> images;
  for (std::uint64_t seed : {2, 3, 4}) {
    roadreg::testing::SceneConfig cfg;
    cfg.seed = seed;
    scenes.push_back(std::make_unique<roadreg::testing::SyntheticScene>(cfg));
    images.push_back(scenes.back()->render_camera_image());
  }
  const PipelineConfig defaults;
  RefineParams rp;
  rp.render = defaults.render_params();
  rp.edges = defaults.edges;
  rp.coarse_sigma = defaults.coarse_sigma;
  rp.optim = defaults.optim_params();
  std::mt19937_64 rng(2024);
  int good = 0;
  double worst_t = 0, worst_r = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto& scene = *scenes[static_cast<std::size_t>(trial) % scenes.size()];
    const ImageGray& image = images[static_cast<std::size_t>(trial) % scenes.size()];
    const PoseSE3 T0 = perturb(scene.pose, 0.5, 1.0, rng);
    try {
      const RefineResult r = refine_extrinsics(scene.cloud, image, scene.K, T0, rp);
      const PoseError e = pose_error(r.pose, scene.pose);
      const bool ok = e.trans_err_m < 0.02 && e.rot_err_deg < 0.05;
      good += ok;
      worst_t = std::max(worst_t, e.trans_err_m);
      worst_r = std::max(worst_r, e.rot_err_deg);
      if (!ok) {
        std::printf("  trial %d (scene %llu): %.4f m / %.4f deg\n", trial,
                    static_cast<unsigned long long>(scene.config.seed), e.trans_err_m, e.rot_err_deg);
      }
    } catch (const Error& e) {
      std::printf("  trial %d failed: %s\n", trial, e.what());
    }
  }
  report("AC2", good >= 19,
         fmt("%d/20 starts perturbed by +-0.5 m / +-1 deg converged within 0.02 m / 0.05 deg "
             "(need 19); worst %.4f m / %.4f deg",
             good, worst_t, worst_r));
}

// -- AC3 ------------------------------------------------------------------------

// Greedy radius downsampling: a point is kept unless a kept point lies closer
// than `radius`.
PointCloud radius_downsample(const PointCloud& in, double radius) {
  struct Hash {
    std::size_t operator()(const std::array<std::int64_t, 3>& k) const {
      return static_cast<std::size_t>(k[0] * 73856093 ^ k[1] * 19349663 ^ k[2] * 83492791);
    }
  };
  std::unordered_map<std::array<std::int64_t, 3>, std::vector<std::size_t>, Hash> grid;
  auto key = [&](const Vec3& p) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / radius)),
                                       static_cast<std::int64_t>(std::floor(p.y() / radius)),
                                       static_cast<std::int64_t>(std::floor(p.z() / radius))};
  };
  PointCloud out;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const Vec3& p = in.points[i];
    const auto k = key(p);
    bool near = false;
    for (int dx = -1; dx <= 1 && !near; ++dx)
      for (int dy = -1; dy <= 1 && !near; ++dy)
        for (int dz = -1; dz <= 1 && !near; ++dz) {
          const auto it = grid.find({k[0] + dx, k[1] + dy, k[2] + dz});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if ((out.points[j] - p).norm() < radius) {
              near = true;
              break;
            }
          }
        }
    if (near) continue;
    grid[k].push_back(out.points.size());
    out.points.push_back(p);
    out.intensity.push_back(in.intensity[i]);
  }
  return out;
}

void bleed_through() {
  // front: 2x2 m plane at z = 10 (white); back: 12x10 m plane at z = 13 (black)
  PointCloud dense;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> J(-0.004, 0.004);
  for (double y = -1; y <= 1 + 1e-9; y += 0.02)
    for (double x = -1; x <= 1 + 1e-9; x += 0.02) {
      dense.points.emplace_back(x + J(rng), y + J(rng), 10);
      dense.intensity.push_back(1.0);
    }
  for (double y = -5; y <= 5; y += 0.02)
    for (double x = -6; x <= 6; x += 0.02) {
      dense.points.emplace_back(x + J(rng), y + J(rng), 13);
      dense.intensity.push_back(0.0);
    }
  const PointCloud cloud = radius_downsample(dense, 0.08);
  const CameraIntrinsics K{200, 200, 159.5, 119.5, 320, 240};
  const PoseSE3 T = PoseSE3::identity();
  RenderParams rp;
  rp.xi = 0.1;
  const RenderedView neighbor = render_view(cloud, K, T, rp);
  const RenderedView naive = render_direct(cloud, K, T);
  g_audit.check(neighbor);

  // silhouette interior: rays hitting the front square, 2 cm clear of its border
  std::size_t inside = 0, bleed_neighbor = 0, holes_neighbor = 0, bleed_naive = 0;
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Vec3 d = pixel_ray(K, Vec2(x, y)).direction;
      const Vec3 hit = d * (10.0 / d.z());
      if (std::abs(hit.x()) > 0.98 || std::abs(hit.y()) > 0.98) continue;
      ++inside;
      if (!neighbor.has(x, y)) {
        ++holes_neighbor;
      } else if (neighbor.depth[neighbor.index(x, y)] > 11.5) {
        ++bleed_neighbor;
      }
      if (naive.has(x, y) && naive.depth[naive.index(x, y)] > 11.5) ++bleed_naive;
    }
  }
  const double naive_pct = 100.0 * static_cast<double>(bleed_naive) / static_cast<double>(inside);
  report("AC3", bleed_neighbor == 0 && naive_pct > 5.0,
         fmt("%zu points after 8 cm downsampling; %zu silhouette pixels; neighbor rendering "
             "(xi = 0.1 m): %zu background pixels, %zu holes; naive projection: %.1f %% background "
             "(need > 5 %%)",
             cloud.size(), inside, bleed_neighbor, holes_neighbor, naive_pct));
}

// -- AC4 ------------------------------------------------------------------------

bool zbuffer_oracle(std::string& note) {
  const CameraIntrinsics K{300, 300, 159.5, 119.5, 320, 240};
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> U(-1, 1), Z(0.5, 30);
  PointCloud c;
  for (int i = 0; i < 10000; ++i) {
    // snap pixels to a coarse grid so many points collide; a few are behind
    const double u = std::floor((U(rng) + 1) * 20) * 8, v = std::floor((U(rng) + 1) * 15) * 8;
    const double z = i % 50 == 0 ? -Z(rng) : Z(rng);
    c.points.emplace_back((u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z);
    c.intensity.push_back(0.5);
  }
  const PoseSE3 T{exp_so3(Vec3(0.002, -0.001, 0.003)), Vec3(0.01, -0.02, 0.05)};
  std::map<std::pair<int, int>, std::pair<double, std::size_t>> best;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3 p = T.R * c.points[i] + T.t;
    if (p.z() <= 0) continue;
    const int u = static_cast<int>(std::lround(K.fx * p.x() / p.z() + K.cx));
    const int v = static_cast<int>(std::lround(K.fy * p.y() / p.z() + K.cy));
    if (u < 0 || v < 0 || u >= K.width || v >= K.height) continue;
    const auto it = best.find({u, v});
    if (it == best.end() || p.z() < it->second.first ||
        (p.z() == it->second.first && i < it->second.second)) {
      best[{u, v}] = {p.z(), i};
    }
  }
  for (int workers : {1, 8}) {
    const ReorganizedCloud r = project_zbuffer(c, K, T, workers);
    if (r.occupied_count() != best.size()) return false;
    for (const auto& [px, b] : best) {
      const Slot& s = r.at(px.first, px.second);
      if (static_cast<std::size_t>(s.index) != b.second || std::abs(s.depth - b.first) > 1e-8) {
        return false;
      }
    }
  }
  note += fmt("z-buffer %zu pixels", best.size());
  return true;
}

bool knn_oracle(std::string& note) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> U(0, 640);
  EdgeSet2D edges;
  edges.width = edges.height = 640;
  for (int i = 0; i < 10000; ++i) {
    // integer-valued half the time to provoke distance ties
    const Vec2 p = i % 2 ? Vec2(U(rng), U(rng)) : Vec2(std::floor(U(rng)), std::floor(U(rng)));
    edges.pixels.push_back(p);
    edges.chain_ids.push_back(i);
  }
  const EdgeIndex index(edges);
  for (int q = 0; q < 500; ++q) {
    const Vec2 query = q % 2 ? Vec2(U(rng), U(rng)) : Vec2(std::floor(U(rng)), std::floor(U(rng)));
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      all.emplace_back((edges.pixels[i] - query).squaredNorm(), i);
    }
    std::partial_sort(all.begin(), all.begin() + 10, all.end());
    const auto got = index.knn(query, 10);
    if (got.size() != 10) return false;
    for (std::size_t k = 0; k < 10; ++k) {
      if (got[k].index != all[k].second || std::abs(got[k].dist2 - all[k].first) > 1e-8) return false;
    }
  }
  note += ", kNN 500 queries x 10 of 10000";
  return true;
}

bool plane_oracle(std::string& note) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 n = Vec3(U(rng), U(rng), U(rng)).normalized();
    const double d = 20 * U(rng);
    const Vec3 a = n.unitOrthogonal(), b = n.cross(a);
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i) pts.push_back(-d * n + 5 * U(rng) * a + 5 * U(rng) * b);
    const Plane p = fit_plane(pts);
    const double s = p.normal.dot(n) > 0 ? 1.0 : -1.0;
    worst = std::max({worst, (s * p.normal - n).norm(), std::abs(s * p.d - d)});
  }
  note += fmt(", plane fit %.1e", worst);
  return worst <= 1e-8;
}

bool pnp_oracle(std::string& note) {
  const CameraIntrinsics K{800, 800, 639.5, 359.5, 1280, 720};
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const PoseSE3 T = pose_from_yaw_pitch_roll(Vec3(5 * U(rng), 5 * U(rng), 6 + U(rng)),
                                               3 * U(rng), -0.2 + 0.1 * U(rng), 0.05 * U(rng));
    std::vector<Correspondence2D3D> corr;
    while (corr.size() < 100) {
      const Vec2 px((U(rng) + 1) * 0.5 * (K.width - 1), (U(rng) + 1) * 0.5 * (K.height - 1));
      const Vec3 d = pixel_ray(K, px).direction;
      const Vec3 pc = d * ((8 + 12 * (U(rng) + 1)) / d.z());
      corr.push_back({px, T.inverse() * pc});
    }
    RansacParams rp;
    rp.seed = 7 + trial;
    const PnpResult r = solve_pnp_ransac(corr, K, rp);
    if (r.inliers.size() != corr.size()) return false;
    worst = std::max({worst, (r.pose.R - T.R).norm(), (r.pose.t - T.t).norm()});
  }
  note += fmt(", PnP %.1e", worst);
  return worst <= 1e-8;
}

bool lie_oracle(std::string& note) {
  std::mt19937_64 rng(45);
  std::uniform_real_distribution<double> U(-1, 1);
  double worst = 0;
  for (int i = 0; i < 2000; ++i) {
    Vec6 v;
    for (int k = 0; k < 6; ++k) v[k] = U(rng) * (k < 3 ? 1.5 : 10.0);
    if (i % 10 == 0) v.head<3>() *= 1e-7;
    // matrix exponential of the 4x4 twist as the independent reference
    Eigen::Matrix4d hat = Eigen::Matrix4d::Zero();
    hat.topLeftCorner<3, 3>() = skew(v.head<3>());
    hat.topRightCorner<3, 1>() = v.tail<3>();
    const Eigen::Matrix4d ref = hat.exp();
    const PoseSE3 T = exp_se3(Twist::from_vector(v));
    worst = std::max({worst, (T.R - ref.topLeftCorner<3, 3>()).norm(),
                      (T.t - ref.topRightCorner<3, 1>()).norm(),
                      (log_se3(T).vector() - v).norm()});
  }
  note += fmt(", exp/log %.1e", worst);
  return worst <= 1e-8;
}

void oracle_suites() {
  std::string note;
  bool ok = true;
  for (auto* fn : {zbuffer_oracle, knn_oracle, plane_oracle, pnp_oracle, lie_oracle}) {
    try {
      ok = fn(note) && ok;
    } catch (const Error& e) {
      note += std::string(", error: ") + e.what();
      ok = false;
    }
  }
  report("AC4", ok, "brute-force/construct-and-recover agreement (tolerance 1e-8): " + note);
}

// -- AC5 ------------------------------------------------------------------------

void gradient_check() {
  roadreg::testing::SceneConfig cfg;
  cfg.seed = 2;
  const roadreg::testing::SyntheticScene scene(cfg);
  const PipelineConfig defaults;
  const RenderedView view = render_view(scene.cloud, scene.K, scene.pose, defaults.render_params());
  g_audit.check(view);
  const EdgeSet3D pts = sample_edge_points(
      lift_edges_3d(extract_edges_2d(view.image, EdgeBackend::Builtin, nullptr, defaults.edges), view),
      defaults.edges.spacing);
  const EdgeIndex index(extract_edges_2d(scene.render_camera_image(), EdgeBackend::Builtin, nullptr,
                                         defaults.edges));
  std::mt19937_64 rng(5);
  double worst_j = 0, worst_g = 0;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const PoseSE3 T = perturb(scene.pose, 0.5, 1.0, rng);
    const auto assoc = associate(pts, index, scene.K, T, 10, 30.0);
    if (assoc.empty()) continue;
    // stacked residual Jacobian: analytic vs central differences
    Eigen::MatrixXd Ja(assoc.size(), 6), Jn(assoc.size(), 6);
    auto residual = [&](const Association& a, const PoseSE3& P) {
      const Vec3 pc = P * a.point;
      return point_line_residual(a.line, Vec2(scene.K.fx * pc.x() / pc.z() + scene.K.cx,
                                              scene.K.fy * pc.y() / pc.z() + scene.K.cy));
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < assoc.size(); ++i) {
      Ja.row(static_cast<Eigen::Index>(i)) =
          assoc[i].line.n.transpose() * pixel_jacobian_wrt_twist(scene.K, T * assoc[i].point);
      for (int k = 0; k < 6; ++k) {
        Vec6 d = Vec6::Zero();
        d[k] = h;
        Jn(static_cast<Eigen::Index>(i), k) =
            (residual(assoc[i], boxplus(T, Twist::from_vector(d))) -
             residual(assoc[i], boxplus(T, Twist::from_vector(-d)))) / (2 * h);
      }
    }
    worst_j = std::max(worst_j, (Ja - Jn).norm() / Jn.norm());
    // gradient of the robust cost actually used by LM
    const auto ev = evaluate_cost(assoc, scene.K, T, 2.0);
    Vec6 g;
    for (int k = 0; k < 6; ++k) {
      Vec6 d = Vec6::Zero();
      d[k] = h;
      g[k] = (evaluate_cost(assoc, scene.K, boxplus(T, Twist::from_vector(d)), 2.0, false).cost -
              evaluate_cost(assoc, scene.K, boxplus(T, Twist::from_vector(-d)), 2.0, false).cost) / (2 * h);
    }
    worst_g = std::max(worst_g, (ev.gradient - g).norm() / g.norm());
    ++checked;
  }
  report("AC5", checked == 20 && worst_j < 1e-4 && worst_g < 1e-4,
         fmt("%d poses: worst relative difference residual Jacobian %.2e, cost gradient %.2e "
             "(limit 1e-4)",
             checked, worst_j, worst_g));
}

// -- AC8 (exact pose) -----------------------------------------------------------

double ground_distance_exact_pose() {
  double worst = 0;
  for (std::uint64_t seed = 21; seed <= 25; ++seed) {
    roadreg::testing::SceneConfig cfg;
    cfg.seed = seed;
    cfg.points_per_pixel = 0.6;
    cfg.max_ground_points = 2e6;
    const roadreg::testing::SyntheticScene scene(cfg);
    const PipelineConfig defaults;
    const RenderParams rp = defaults.render_params();
    const RenderedView view = render_view(scene.cloud, scene.K, scene.pose, rp);
    g_audit.check(view);
    const auto pairs = roadreg::testing::ground_marker_pairs(scene, 20, rp.window / 2 + 1, seed);
    worst = std::max(worst, ground_distance_errors(pairs, view).max_pct);
  }
  return worst;
}

}  // namespace

int main() {
  unsetenv("ROADREG_WORKERS");
  oracle_suites();
  gradient_check();
  bleed_through();
  perturbation_robustness();
  const PipelineOutcome pipeline = full_pipeline();
  const double exact_max = ground_distance_exact_pose();
  report("AC8", exact_max < 0.5 && pipeline.ground_ok,
         fmt("exact pose: max r %.4f %% over 5 scenes x 20 marker pairs (limit 0.5 %%); "
             "estimated pose: worst per-scene median r %.4f %% (limit 2 %%)",
             exact_max, pipeline.worst_median_pct));
  report("AC6", g_audit.violations == 0 && g_audit.shaded > 0,
         fmt("%zu views, %zu shaded pixels, %zu beyond 0.51 px (worst %.4f px)", g_audit.views,
             g_audit.shaded, g_audit.violations, g_audit.worst));
  std::printf("%s\n", g_failures == 0 ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
  return g_failures == 0 ? 0 : 1;
}
