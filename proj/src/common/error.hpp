#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace facehal {

enum class ErrorCode {
  InvalidArgument,
  UnreadableFile,
  MalformedMesh,
  EmptyMesh,
  MissingNormals,
  DegenerateResult,
  MissingIntrinsics,
  DimensionMismatch,
  WrongCount,
  MissingAnchor,
  DuplicateName,
  EmptyRegion,
  DegenerateGeometry,
  TooFewValid,
  DegenerateConfiguration,
  NoConvergence,
  InsufficientLandmarks,
  SolverFailure,
  NonManifoldEdge,
  ShapeMismatch,
  EmptySection,
  ZeroVector,
  EmptyPart,
  TopologyMismatch,
  ParamMismatch,
  UnknownId,
  MissingSource,
  SingularSystem,
  InvalidConfig,
};

/// Whether an error originates in the data (exit code 2) or in a numerical
/// routine (exit code 3).
enum class ErrorCategory { Usage, Data, Numerical };

std::string_view error_code_name(ErrorCode code) noexcept;
ErrorCategory error_category(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix, for rewrapping with context.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace facehal
