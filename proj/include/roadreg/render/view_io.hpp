// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// Binary correspondence sidecar for RenderedView, so that pipeline stages can
// run as separate processes.
//
// Layout (little-endian):
//   char[4]  "RRCM"
//   uint32   width
//   uint32   height
//   width*height records, row-major, each
//     uint8    flag (1 = shaded)
//     float64  x, y, z  (world frame; zeros for holes)

#ifndef ROADREG_RENDER_VIEW_IO_HPP
#define ROADREG_RENDER_VIEW_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "roadreg/render/neighbor_render.hpp"

namespace roadreg {

struct CorrespondenceMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> valid;
  std::vector<Vec3> points;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "sidecar I/O assumes a little-endian host");

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace detail

inline void save_correspondence_sidecar(const std::filesystem::path& path,
                                        const RenderedView& view) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "render", "cannot write " + path.string());
  out.write("RRCM", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(view.width()));
  detail::put_u32(out, static_cast<std::uint32_t>(view.height()));
  std::vector<char> record(1 + 3 * sizeof(double));
  for (std::size_t i = 0; i < view.valid.size(); ++i) {
    record[0] = static_cast<char>(view.valid[i] ? 1 : 0);
    const Vec3 p = view.valid[i] ? view.correspondence[i] : Vec3::Zero();
    const double xyz[3] = {p.x(), p.y(), p.z()};
    std::memcpy(record.data() + 1, xyz, sizeof(xyz));
    out.write(record.data(), static_cast<std::streamsize>(record.size()));
  }
}

[[nodiscard]] inline CorrespondenceMap load_correspondence_sidecar(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "render", "cannot open " + path.string());
  char magic[4];
  std::uint32_t w = 0, h = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), sizeof(w));
  in.read(reinterpret_cast<char*>(&h), sizeof(h));
  if (!in || std::memcmp(magic, "RRCM", 4) != 0) {
    fail(ErrorCode::ParseError, "render", "bad sidecar header");
  }
  CorrespondenceMap map;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  map.valid.resize(n);
  map.points.resize(n);
  char record[1 + 3 * sizeof(double)];
  for (std::size_t i = 0; i < n; ++i) {
    in.read(record, sizeof(record));
    if (!in) fail(ErrorCode::ParseError, "render", "truncated sidecar");
    double xyz[3];
    std::memcpy(xyz, record + 1, sizeof(xyz));
    map.valid[i] = record[0] ? 1 : 0;
    map.points[i] = {xyz[0], xyz[1], xyz[2]};
  }
  return map;
}

}  // namespace roadreg

#endif  // ROADREG_RENDER_VIEW_IO_HPP
