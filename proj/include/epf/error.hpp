#pragma once

#include <stdexcept>
#include <string>

namespace epf {

enum class ErrorCode {
  ShapeMismatch,
  SingularDesign,
  ParseError,
  GapError,
  InsufficientHistory,
  RangeError,
  DegenerateColumn,
  MissingInput,
  NonFiniteGradient,
  TrialFailed,
  AllTrialsFailed,
  DegenerateBaseline,
  DegenerateDifferential,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace epf
