#include "lhids/errors.hpp"

namespace lhids {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyTrace: return "EmptyTrace";
    case ErrorCode::kEncodingError: return "EncodingError";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kTokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kIndivisibleLength: return "IndivisibleLength";
    case ErrorCode::kTapeMismatch: return "TapeMismatch";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kDivergenceDetected: return "DivergenceDetected";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kEmptySample: return "EmptySample";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInsufficientScores: return "InsufficientScores";
    case ErrorCode::kNonFiniteScore: return "NonFiniteScore";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kArtifactMismatch: return "ArtifactMismatch";
    case ErrorCode::kBadParameter: return "BadParameter";
    case ErrorCode::kCorruptArtifact: return "CorruptArtifact";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kWrongKind: return "WrongKind";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message),
      code_(code) {}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace lhids
