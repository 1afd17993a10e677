// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Intermediate artifacts: match files, edge masks, pose/intrinsics JSON and
// edge overlays.

#ifndef ROADREG_IO_ARTIFACTS_HPP
#define ROADREG_IO_ARTIFACTS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "roadreg/core/camera.hpp"
#include "roadreg/core/lie.hpp"
#include "roadreg/io/image.hpp"
#include "roadreg/io/point_cloud_io.hpp"

namespace roadreg {

/// A pixel pair: `a` in the first image, `b` in the second.
struct PixelMatch {
  Vec2 a;
  Vec2 b;
};

using MatchList = std::vector<PixelMatch>;

struct ImageSize {
  int width = 0;
  int height = 0;
  [[nodiscard]] bool contains(const Vec2& p) const {
    return p.x() >= 0 && p.y() >= 0 && p.x() < width && p.y() < height;
  }
};

/// Binary edge mask; 1 marks an edge (or segment) pixel.
struct EdgeMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  [[nodiscard]] bool at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x] != 0;
  }
};

/// Reads "u_a v_a u_b v_b" lines ('#' starts a comment). When sizes are given,
/// coordinates outside [0,width) x [0,height) raise BoundsError.
[[nodiscard]] inline MatchList load_matches(const std::filesystem::path& path,
                                            std::optional<ImageSize> size_a = std::nullopt,
                                            std::optional<ImageSize> size_b = std::nullopt) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "pcio", "cannot open " + path.string());
  MatchList out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() != 4) {
      fail(ErrorCode::ParseError, "pcio",
           "match line " + std::to_string(line_no) + " needs 4 values");
    }
    PixelMatch m{{detail::parse_double(tok[0]), detail::parse_double(tok[1])},
                 {detail::parse_double(tok[2]), detail::parse_double(tok[3])}};
    if (!m.a.allFinite() || !m.b.allFinite()) {
      fail(ErrorCode::ParseError, "pcio", "non-finite match coordinate");
    }
    if ((size_a && !size_a->contains(m.a)) || (size_b && !size_b->contains(m.b))) {
      fail(ErrorCode::BoundsError, "pcio",
           "match line " + std::to_string(line_no) + " lies outside the image");
    }
    out.push_back(m);
  }
  return out;
}

inline void save_matches(const std::filesystem::path& path, std::span<const PixelMatch> matches) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "pcio", "cannot write " + path.string());
  out << "# u_a v_a u_b v_b\n" << std::setprecision(17);
  for (const auto& m : matches) {
    out << m.a.x() << ' ' << m.a.y() << ' ' << m.b.x() << ' ' << m.b.y() << '\n';
  }
}

/// PGM mask; any non-zero value is an edge.
[[nodiscard]] inline EdgeMask load_edge_mask(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path, "pcio");
  int w = 0, h = 0, c = 0;
  const auto values = detail::read_pnm(bytes, w, h, c);
  if (c != 1) fail(ErrorCode::ParseError, "pcio", "edge mask must be a PGM");
  EdgeMask mask{w, h, std::vector<std::uint8_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) mask.pixels[i] = values[i] > 0.0 ? 1 : 0;
  return mask;
}

inline void save_edge_mask(const std::filesystem::path& path, const EdgeMask& mask) {
  ImageGray img(mask.width, mask.height);
  for (std::size_t i = 0; i < mask.pixels.size(); ++i) img.pixels[i] = mask.pixels[i] ? 1.0 : 0.0;
  save_pgm(path, img);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

[[nodiscard]] inline nlohmann::json pose_to_json(const PoseSE3& T) {
  nlohmann::json j;
  j["R"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) j["R"].push_back({T.R(r, 0), T.R(r, 1), T.R(r, 2)});
  j["t"] = {T.t.x(), T.t.y(), T.t.z()};
  j["convention"] = "world_to_camera";
  return j;
}

[[nodiscard]] inline PoseSE3 pose_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("convention") && j.at("convention") != "world_to_camera") {
      fail(ErrorCode::ParseError, "pcio", "unsupported pose convention");
    }
    PoseSE3 T;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) T.R(r, c) = j.at("R").at(r).at(c).get<double>();
    }
    for (int i = 0; i < 3; ++i) T.t[i] = j.at("t").at(i).get<double>();
    if (!T.is_valid(1e-6)) fail(ErrorCode::ParseError, "pcio", "R is not a rotation");
    return T;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "pcio", std::string("malformed pose JSON: ") + e.what());
  }
}

[[nodiscard]] inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "pcio", "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "pcio", path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "pcio", "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline void save_pose(const std::filesystem::path& path, const PoseSE3& T) {
  write_json_file(path, pose_to_json(T));
}

[[nodiscard]] inline PoseSE3 load_pose(const std::filesystem::path& path) {
  return pose_from_json(read_json_file(path));
}

[[nodiscard]] inline nlohmann::json intrinsics_to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx},
          {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
}

[[nodiscard]] inline CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  try {
    CameraIntrinsics K;
    K.fx = j.at("fx").get<double>();
    K.fy = j.at("fy").get<double>();
    K.cx = j.at("cx").get<double>();
    K.cy = j.at("cy").get<double>();
    K.width = j.at("width").get<int>();
    K.height = j.at("height").get<int>();
    K.validate();
    return K;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, "pcio", std::string("malformed intrinsics: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Overlay
// ---------------------------------------------------------------------------

inline constexpr std::array<std::uint8_t, 3> kOverlayGreen{0, 255, 0};

/// Writes the image as PPM with the given pixel positions painted green.
inline void save_overlay(const std::filesystem::path& path, const ImageGray& image,
                         std::span<const Vec2> projected) {
  ImageRgb8 rgb = ImageRgb8::from_gray(image);
  for (const Vec2& p : projected) {
    rgb.set(static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())),
            kOverlayGreen);
  }
  save_ppm(path, rgb);
}

}  // namespace roadreg

#endif  // ROADREG_IO_ARTIFACTS_HPP
