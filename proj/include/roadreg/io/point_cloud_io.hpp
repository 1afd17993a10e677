// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0
//
// ASCII PLY / PCD / XYZ point cloud readers and an ASCII PLY writer.

#ifndef ROADREG_IO_POINT_CLOUD_IO_HPP
#define ROADREG_IO_POINT_CLOUD_IO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "roadreg/core/types.hpp"

namespace roadreg {

enum class CloudFormat { Ply, Pcd, Xyz, Auto };

struct CloudLoadReport {
  std::size_t rows_read = 0;
  std::size_t dropped_non_finite = 0;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& s) {
  // strtod accepts "nan"/"inf", which the loader then drops as non-finite
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    fail(ErrorCode::ParseError, "pcio", "bad number '" + s + "'");
  }
  return v;
}

/// Column layout of a cloud record, shared by the three formats.
struct CloudColumns {
  int x = -1, y = -1, z = -1;
  int r = -1, g = -1, b = -1;
  int intensity = -1;
  int packed_rgb = -1;  // PCD "rgb"/"rgba" packed into a float
  bool rgb_is_byte = true;
  std::size_t count = 0;
};

struct RawRow {
  Vec3 p;
  Vec3 rgb = Vec3::Zero();
  double intensity = 0.0;
};

inline RawRow decode_row(const std::vector<std::string>& tok, const CloudColumns& cols) {
  if (tok.size() < cols.count) {
    fail(ErrorCode::ParseError, "pcio", "record has too few fields");
  }
  RawRow row;
  row.p = {parse_double(tok[cols.x]), parse_double(tok[cols.y]), parse_double(tok[cols.z])};
  if (cols.r >= 0) {
    row.rgb = {parse_double(tok[cols.r]), parse_double(tok[cols.g]),
               parse_double(tok[cols.b])};
    if (cols.rgb_is_byte) row.rgb /= 255.0;
  } else if (cols.packed_rgb >= 0) {
    const double f = parse_double(tok[cols.packed_rgb]);
    std::uint32_t bits = 0;
    if (f >= 0 && f == std::floor(f) && f <= 16777215.0) {
      bits = static_cast<std::uint32_t>(f);  // already an integer 0xRRGGBB
    } else {
      const float ff = static_cast<float>(f);
      std::memcpy(&bits, &ff, sizeof(bits));
    }
    row.rgb = {((bits >> 16) & 0xff) / 255.0, ((bits >> 8) & 0xff) / 255.0,
               (bits & 0xff) / 255.0};
  }
  if (cols.intensity >= 0) row.intensity = parse_double(tok[cols.intensity]);
  return row;
}

inline void assign_column(CloudColumns& cols, const std::string& name, int index) {
  if (name == "x") cols.x = index;
  else if (name == "y") cols.y = index;
  else if (name == "z") cols.z = index;
  else if (name == "red" || name == "r") cols.r = index;
  else if (name == "green" || name == "g") cols.g = index;
  else if (name == "blue" || name == "b") cols.b = index;
  else if (name == "intensity" || name == "scalar_intensity" || name == "i")
    cols.intensity = index;
  else if (name == "rgb" || name == "rgba") cols.packed_rgb = index;
}

inline void require_xyz(const CloudColumns& cols) {
  if (cols.x < 0 || cols.y < 0 || cols.z < 0) {
    fail(ErrorCode::ParseError, "pcio", "cloud header lacks x/y/z fields");
  }
  if ((cols.r >= 0) != (cols.g >= 0) || (cols.r >= 0) != (cols.b >= 0)) {
    fail(ErrorCode::ParseError, "pcio", "incomplete rgb fields");
  }
}

inline PointCloud finalize_cloud(const std::vector<RawRow>& rows, const CloudColumns& cols,
                                 CloudLoadReport& report) {
  PointCloud cloud;
  const bool use_rgb = cols.r >= 0 || cols.packed_rgb >= 0;
  const bool use_intensity = !use_rgb && cols.intensity >= 0;
  report.rows_read = rows.size();
  for (const auto& row : rows) {
    const bool ok = row.p.allFinite() && (!use_rgb || row.rgb.allFinite()) &&
                    (!use_intensity || std::isfinite(row.intensity));
    if (!ok) {
      ++report.dropped_non_finite;
      continue;
    }
    cloud.points.push_back(row.p);
    if (use_rgb) {
      cloud.rgb.push_back(row.rgb.cwiseMax(0.0).cwiseMin(1.0));
    } else if (use_intensity) {
      cloud.intensity.push_back(row.intensity);
    }
  }
  if (cloud.points.empty()) fail(ErrorCode::EmptyCloud, "pcio", "no valid points");
  if (use_intensity) {
    const auto [lo, hi] = std::minmax_element(cloud.intensity.begin(), cloud.intensity.end());
    const double min_v = *lo;
    const double range = *hi - *lo;
    for (double& v : cloud.intensity) v = range > 0 ? (v - min_v) / range : 0.0;
  }
  return cloud;
}

inline PointCloud read_ply(std::istream& in, CloudLoadReport& report) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    fail(ErrorCode::ParseError, "pcio", "missing 'ply' magic");
  }
  CloudColumns cols;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool seen_vertex = false;
  int prop_index = 0;
  bool ascii = false;
  bool header_done = false;
  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() < 2) fail(ErrorCode::ParseError, "pcio", "bad format line");
      if (tok[1] != "ascii") {
        fail(ErrorCode::ParseError, "pcio", "only ASCII PLY is supported");
      }
      ascii = true;
    } else if (tok[0] == "element") {
      if (tok.size() < 3) fail(ErrorCode::ParseError, "pcio", "bad element line");
      if (seen_vertex && in_vertex) in_vertex = false;
      if (tok[1] == "vertex") {
        in_vertex = true;
        seen_vertex = true;
        vertex_count = static_cast<std::size_t>(parse_double(tok[2]));
      } else {
        in_vertex = false;
      }
    } else if (tok[0] == "property") {
      if (in_vertex) {
        if (tok.size() < 3 || tok[1] == "list") {
          fail(ErrorCode::ParseError, "pcio", "unsupported vertex property");
        }
        const std::string& type = tok[1];
        const std::string& name = tok.back();
        assign_column(cols, name, prop_index);
        if ((name == "red" || name == "green" || name == "blue") &&
            (type == "float" || type == "float32" || type == "double" ||
             type == "float64")) {
          cols.rgb_is_byte = false;
        }
        ++prop_index;
      }
    } else if (tok[0] == "end_header") {
      header_done = true;
      break;
    } else {
      fail(ErrorCode::ParseError, "pcio", "unexpected PLY header line: " + line);
    }
  }
  if (!header_done || !ascii || !seen_vertex) {
    fail(ErrorCode::ParseError, "pcio", "incomplete PLY header");
  }
  cols.count = static_cast<std::size_t>(prop_index);
  require_xyz(cols);
  std::vector<RawRow> rows;
  rows.reserve(vertex_count);
  while (rows.size() < vertex_count) {
    if (!std::getline(in, line)) fail(ErrorCode::ParseError, "pcio", "truncated PLY body");
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    rows.push_back(decode_row(tok, cols));
  }
  return finalize_cloud(rows, cols, report);
}

inline PointCloud read_pcd(std::istream& in, CloudLoadReport& report) {
  std::string line;
  CloudColumns cols;
  std::vector<std::size_t> counts;
  std::vector<std::string> fields;
  std::size_t points = 0;
  bool have_points = false;
  bool data_ascii = false;
  while (std::getline(in, line)) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    if (tok[0] == "FIELDS") {
      fields.assign(tok.begin() + 1, tok.end());
    } else if (tok[0] == "COUNT") {
      for (std::size_t i = 1; i < tok.size(); ++i) {
        counts.push_back(static_cast<std::size_t>(parse_double(tok[i])));
      }
    } else if (tok[0] == "POINTS") {
      if (tok.size() < 2) fail(ErrorCode::ParseError, "pcio", "bad POINTS line");
      points = static_cast<std::size_t>(parse_double(tok[1]));
      have_points = true;
    } else if (tok[0] == "DATA") {
      if (tok.size() < 2 || tok[1] != "ascii") {
        fail(ErrorCode::ParseError, "pcio", "only ASCII PCD is supported");
      }
      data_ascii = true;
      break;
    } else if (tok[0] == "VERSION" || tok[0] == "SIZE" || tok[0] == "TYPE" ||
               tok[0] == "WIDTH" || tok[0] == "HEIGHT" || tok[0] == "VIEWPOINT") {
      continue;
    } else {
      fail(ErrorCode::ParseError, "pcio", "unexpected PCD header line: " + line);
    }
  }
  if (!data_ascii || fields.empty() || !have_points) {
    fail(ErrorCode::ParseError, "pcio", "incomplete PCD header");
  }
  int column = 0;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    assign_column(cols, fields[i], column);
    column += static_cast<int>(i < counts.size() ? counts[i] : 1);
  }
  cols.count = static_cast<std::size_t>(column);
  require_xyz(cols);
  std::vector<RawRow> rows;
  rows.reserve(points);
  while (rows.size() < points) {
    if (!std::getline(in, line)) fail(ErrorCode::ParseError, "pcio", "truncated PCD body");
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    rows.push_back(decode_row(tok, cols));
  }
  return finalize_cloud(rows, cols, report);
}

/// "x y z", "x y z i" or "x y z r g b" per line. RGB values above 1 are
/// treated as 0..255.
inline PointCloud read_xyz(std::istream& in, CloudLoadReport& report) {
  std::string line;
  std::vector<RawRow> rows;
  CloudColumns cols;
  std::size_t width = 0;
  bool any_rgb_above_one = false;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (width == 0) {
      width = tok.size();
      if (width != 3 && width != 4 && width != 6) {
        fail(ErrorCode::ParseError, "pcio", "XYZ rows need 3, 4 or 6 columns");
      }
      cols.x = 0;
      cols.y = 1;
      cols.z = 2;
      if (width == 4) cols.intensity = 3;
      if (width == 6) {
        cols.r = 3;
        cols.g = 4;
        cols.b = 5;
        cols.rgb_is_byte = false;
      }
      cols.count = width;
    } else if (tok.size() != width) {
      fail(ErrorCode::ParseError, "pcio", "inconsistent XYZ column count");
    }
    rows.push_back(decode_row(tok, cols));
    if (width == 6 && rows.back().rgb.maxCoeff() > 1.0) any_rgb_above_one = true;
  }
  if (any_rgb_above_one) {
    for (auto& r : rows) r.rgb /= 255.0;
  }
  if (rows.empty()) fail(ErrorCode::EmptyCloud, "pcio", "no valid points");
  return finalize_cloud(rows, cols, report);
}

}  // namespace detail

[[nodiscard]] inline CloudFormat cloud_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".ply") return CloudFormat::Ply;
  if (ext == ".pcd") return CloudFormat::Pcd;
  return CloudFormat::Xyz;
}

/// Loads an ASCII cloud. Rows with non-finite values are dropped and counted
/// in `report`. RGB is normalized to [0,1]; intensity is min-max normalized.
[[nodiscard]] inline PointCloud load_point_cloud(const std::filesystem::path& path,
                                                 CloudFormat format = CloudFormat::Auto,
                                                 CloudLoadReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "pcio", "cannot open " + path.string());
  if (format == CloudFormat::Auto) format = cloud_format_from_path(path);
  CloudLoadReport local;
  CloudLoadReport& rep = report ? *report : local;
  switch (format) {
    case CloudFormat::Ply: return detail::read_ply(in, rep);
    case CloudFormat::Pcd: return detail::read_pcd(in, rep);
    default: return detail::read_xyz(in, rep);
  }
}

/// ASCII PLY with uchar rgb (or float intensity).
inline void save_point_cloud_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "pcio", "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty double x\nproperty double y\nproperty double z\n";
  if (cloud.has_rgb()) {
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  } else if (!cloud.intensity.empty()) {
    out << "property float intensity\n";
  }
  out << "end_header\n" << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_rgb()) {
      for (int c = 0; c < 3; ++c) {
        out << ' ' << std::lround(std::clamp(cloud.rgb[i][c], 0.0, 1.0) * 255.0);
      }
    } else if (!cloud.intensity.empty()) {
      out << ' ' << cloud.intensity[i];
    }
    out << '\n';
  }
}

}  // namespace roadreg

#endif  // ROADREG_IO_POINT_CLOUD_IO_HPP
