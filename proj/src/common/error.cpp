#include "common/error.hpp"

namespace facehal {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::MalformedMesh: return "MalformedMesh";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::MissingNormals: return "MissingNormals";
    case ErrorCode::DegenerateResult: return "DegenerateResult";
    case ErrorCode::MissingIntrinsics: return "MissingIntrinsics";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::WrongCount: return "WrongCount";
    case ErrorCode::MissingAnchor: return "MissingAnchor";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::TooFewValid: return "TooFewValid";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InsufficientLandmarks: return "InsufficientLandmarks";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::NonManifoldEdge: return "NonManifoldEdge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptySection: return "EmptySection";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyPart: return "EmptyPart";
    case ErrorCode::TopologyMismatch: return "TopologyMismatch";
    case ErrorCode::ParamMismatch: return "ParamMismatch";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::MissingSource: return "MissingSource";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig:
      return ErrorCategory::Usage;
    case ErrorCode::DegenerateResult:
    case ErrorCode::DegenerateConfiguration:
    case ErrorCode::NoConvergence:
    case ErrorCode::SolverFailure:
    case ErrorCode::SingularSystem:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace facehal
