#pragma once

#include <stdexcept>
#include <string>

namespace headpose {

// Numeric values are shared with the C API status codes in headpose.h.
enum class ErrorCode : int {
  kInvalidInput = 1,
  kParse = 2,
  kIo = 3,
  kProjectionSingularity = 4,
  kInsufficientPoints = 5,
  kNumericalFailure = 6,
  kDegenerateTraining = 7,
  kModelIncomplete = 8,
  kUndefinedMetric = 9,
  kSplitInfeasible = 10,
  kSpecInvalid = 11,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace headpose
