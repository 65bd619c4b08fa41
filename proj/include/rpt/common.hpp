#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>
#include <string_view>

namespace rpt {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorCode {
  NonPositiveDepth,
  NonConvergence,
  ParallelRays,
  InvalidCalibration,
  UnknownJointSet,
  InvalidJointSet,
  TooFewViews,
  CalibrationMissing,
  InvalidConfig,
  FrameMisalignment,
  InfeasibleSpec,
  SchemaError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ParallelRays: return "ParallelRays";
    case ErrorCode::InvalidCalibration: return "InvalidCalibration";
    case ErrorCode::UnknownJointSet: return "UnknownJointSet";
    case ErrorCode::InvalidJointSet: return "InvalidJointSet";
    case ErrorCode::TooFewViews: return "TooFewViews";
    case ErrorCode::CalibrationMissing: return "CalibrationMissing";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::FrameMisalignment: return "FrameMisalignment";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rpt
