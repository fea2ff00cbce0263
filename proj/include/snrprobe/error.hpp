#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace snrprobe {

enum class ErrorCode {
  UnsupportedFormat,
  CorruptFile,
  EmptyNoise,
  SilentInput,
  TooShort,
  BadMagic,
  UnsupportedDtype,
  ShapeOverflow,
  EmptyAxis,
  DimensionMismatch,
  TooFewRows,
  DegenerateInput,
  RowMismatch,
  MissingCell,
  ConstantPredictor,
  LengthMismatch,
  AllTied,
  IncompleteGrid,
  BadEpsilon,
  ZeroRow,
  EigenFailure,
  NonConvergence,
  EmptyMatrix,
  InvalidArgument,
  MissingInput,
  ConfigError,
  IoError,
  StageFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace snrprobe
