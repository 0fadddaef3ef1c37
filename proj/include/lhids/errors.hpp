#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lhids {

enum class ErrorCode {
  // trace-ingest
  kEmptyTrace,
  kEncodingError,
  kInsufficientData,
  // neural-kernels
  kTokenOutOfRange,
  kShapeMismatch,
  kIndivisibleLength,
  kTapeMismatch,
  // svdd-training
  kEmptyTrainingSet,
  kDivergenceDetected,
  // quantizer
  kNonFiniteInput,
  // isolation-forest
  kEmptySample,
  kDimensionMismatch,
  // calibration-detection
  kInsufficientScores,
  kNonFiniteScore,
  kLengthMismatch,
  kArtifactMismatch,
  // synthgen
  kBadParameter,
  // artifacts and configuration
  kCorruptArtifact,
  kVersionMismatch,
  kWrongKind,
  kIoError,
  kConfigError,
};

std::string_view error_name(ErrorCode code);

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 protected:
  struct Verbatim {};
  // Uses message as the full text, without the error-name prefix.
  Error(ErrorCode code, const std::string& message, Verbatim)
      : std::runtime_error(message), code_(code) {}

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace lhids
