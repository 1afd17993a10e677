// roadreg - point cloud to roadside camera registration
// SPDX-License-Identifier: Apache-2.0

#ifndef ROADREG_CORE_ERROR_HPP
#define ROADREG_CORE_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace roadreg {

enum class ErrorCode {
  NearPiRotation,
  BehindCamera,
  ParseError,
  EmptyCloud,
  BoundsError,
  DimensionMismatch,
  DegenerateGeometry,
  ParallelRay,
  NegativeDepth,
  BackendUnavailable,
  InsufficientCorrespondences,
  NoConsensus,
  NoYawSucceeded,
  DegeneratePixels,
  NoAssociations,
  DivergedPose,
  EmptyEdgeSet,
  NoCorrespondence,
  ConfigError,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NearPiRotation: return "NearPiRotation";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::BoundsError: return "BoundsError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::ParallelRay: return "ParallelRay";
    case ErrorCode::NegativeDepth: return "NegativeDepth";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::NoYawSucceeded: return "NoYawSucceeded";
    case ErrorCode::DegeneratePixels: return "DegeneratePixels";
    case ErrorCode::NoAssociations: return "NoAssociations";
    case ErrorCode::DivergedPose: return "DivergedPose";
    case ErrorCode::EmptyEdgeSet: return "EmptyEdgeSet";
    case ErrorCode::NoCorrespondence: return "NoCorrespondence";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library. The message carries a module prefix,
/// e.g. "render: ParallelRay: ray is parallel to plane".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string_view module, const std::string& detail)
      : std::runtime_error(std::string(module) + ": " +
                           std::string(to_string(code)) + ": " + detail),
        code_(code),
        module_(module) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& module() const noexcept { return module_; }

 private:
  ErrorCode code_;
  std::string module_;
};

[[noreturn]] inline void fail(ErrorCode code, std::string_view module,
                              const std::string& detail) {
  throw Error(code, module, detail);
}

}  // namespace roadreg

#endif  // ROADREG_CORE_ERROR_HPP
