// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Edge-based refinement of an initial pose: render the prior map once at the
// initial pose, lift its edges to 3D, and align them to the camera image edges.
// With the builtin edge backend a heavily smoothed pass runs first to widen the
// basin of convergence, then a pass at the configured smoothing.

#ifndef ROADREG_PIPELINE_REGISTER_HPP
#define ROADREG_PIPELINE_REGISTER_HPP

#include <optional>
#include <string>
#include <vector>

#include "roadreg/edges/edges.hpp"
#include "roadreg/optim/optimizer.hpp"
#include "roadreg/render/neighbor_render.hpp"

namespace roadreg {

struct RefineParams {
  RenderParams render{.window = 5, .xi = 2.0};
  EdgeBackend backend = EdgeBackend::Builtin;
  EdgeParams edges;
  double coarse_sigma = 8.0;  // 0 skips the coarse pass
  OptimizeParams optim;
};

struct RefinePass {
  std::string name;  // "coarse" or "fine"
  double sigma = 0.0;
  std::size_t camera_edges = 0;
  std::size_t render_edges = 0;
  std::size_t edge_points_3d = 0;
  RegistrationResult result;
};

struct RefineResult {
  PoseSE3 pose;
  RenderedView view;  // rendered at the initial pose
  EdgeSet3D edge_points;  // fine-pass 3D samples, for overlays
  std::vector<RefinePass> passes;
};

namespace detail {

inline RefinePass refine_pass(const std::string& name, const ImageGray& camera_image,
                              const EdgeMask* camera_mask, const RenderedView& view,
                              const EdgeMask* render_mask, const PoseSE3& start,
                              EdgeBackend backend, const EdgeParams& ep,
                              const OptimizeParams& op, EdgeSet3D& points_out) {
  RefinePass pass;
  pass.name = name;
  pass.sigma = ep.sigma;
  const EdgeSet2D cam = extract_edges_2d(camera_image, backend, camera_mask, ep);
  // without a mask for the rendered view its edges come from the builtin detector
  const EdgeBackend render_backend = render_mask ? EdgeBackend::MaskFile : EdgeBackend::Builtin;
  const EdgeSet2D ren = extract_edges_2d(view.image, render_backend, render_mask, ep);
  pass.camera_edges = cam.size();
  pass.render_edges = ren.size();
  points_out = sample_edge_points(lift_edges_3d(ren, view, ep.depth_gap), ep.spacing);
  pass.edge_points_3d = points_out.size();
  if (points_out.empty()) fail(ErrorCode::NoAssociations, "optim", "no 3D edge points in the rendered view");
  pass.result = optimize(points_out, EdgeIndex(cam), view.intrinsics, start, op);
  return pass;
}

}  // namespace detail

/// `camera_mask` is required for the mask backend; `render_mask` is optional
/// and, when present, replaces detection on the rendered view.
[[nodiscard]] inline RefineResult refine_extrinsics(const PointCloud& cloud,
                                                    const ImageGray& camera_image,
                                                    const CameraIntrinsics& K,
                                                    const PoseSE3& initial,
                                                    const RefineParams& params,
                                                    const EdgeMask* camera_mask = nullptr,
                                                    const EdgeMask* render_mask = nullptr) {
  if (camera_image.width != K.width || camera_image.height != K.height) {
    fail(ErrorCode::DimensionMismatch, "optim", "camera image does not match the intrinsics");
  }
  RefineResult out;
  out.view = render_view(cloud, K, initial, params.render);
  PoseSE3 T = initial;
  EdgeSet3D points;
  if (params.backend == EdgeBackend::Builtin && params.coarse_sigma > 0 && !render_mask) {
    EdgeParams coarse = params.edges;
    coarse.sigma = params.coarse_sigma;
    out.passes.push_back(detail::refine_pass("coarse", camera_image, nullptr, out.view, nullptr,
                                             T, params.backend, coarse, params.optim, points));
    T = out.passes.back().result.pose;
  }
  out.passes.push_back(detail::refine_pass("fine", camera_image, camera_mask, out.view,
                                           render_mask, T, params.backend, params.edges,
                                           params.optim, points));
  out.pose = out.passes.back().result.pose;
  out.edge_points = std::move(points);
  return out;
}

}  // namespace roadreg

#endif  // ROADREG_PIPELINE_REGISTER_HPP
