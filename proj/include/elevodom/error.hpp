#pragma once

#include <stdexcept>
#include <string>

namespace elevodom {

/// Failure categories surfaced by the library. The C API maps these
/// one-to-one onto eo_status values, so the numbering is stable.
enum class ErrorCode {
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kInvalidRotation = 4,
  kInvalidNormal = 5,
  kInvalidMeasurement = 6,
  kSingularSystem = 7,
  kEvaluation = 8,
  kDegenerateInput = 9,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace elevodom
