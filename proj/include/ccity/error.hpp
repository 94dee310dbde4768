#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ccity {

enum class ErrorKind {
  kMalformedJson,
  kSchemaViolation,
  kInvariantViolation,
  kInvalidGridParams,
  kRouteUnresolvable,
  kOutOfRange,
  kValidationFailed,
  kIoError,
  kCorruptLog,
  kSamplingExhausted,
  kUnknownVehicle,
  kMissingLag,
  kShapeMismatch,
  kNodeSetMismatch,
};

std::string_view to_string(ErrorKind kind);

// Every failure surfaced by the library is an Error tagged with its kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ccity
