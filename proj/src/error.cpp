#include "snrprobe/error.hpp"

namespace snrprobe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::EmptyNoise: return "EmptyNoise";
    case ErrorCode::SilentInput: return "SilentInput";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::ShapeOverflow: return "ShapeOverflow";
    case ErrorCode::EmptyAxis: return "EmptyAxis";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::RowMismatch: return "RowMismatch";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::ConstantPredictor: return "ConstantPredictor";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AllTied: return "AllTied";
    case ErrorCode::IncompleteGrid: return "IncompleteGrid";
    case ErrorCode::BadEpsilon: return "BadEpsilon";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::StageFailure: return "StageFailure";
  }
  return "Unknown";
}

}  // namespace snrprobe
