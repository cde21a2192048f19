#include "epf/error.hpp"

namespace epf {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::GapError: return "GapError";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::DegenerateColumn: return "DegenerateColumn";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::TrialFailed: return "TrialFailed";
    case ErrorCode::AllTrialsFailed: return "AllTrialsFailed";
    case ErrorCode::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::DegenerateDifferential: return "DegenerateDifferential";
  }
  return "UnknownError";
}

}  // namespace epf
