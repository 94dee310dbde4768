#include "ccity/error.hpp"

namespace ccity {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMalformedJson: return "MalformedJson";
    case ErrorKind::kSchemaViolation: return "SchemaViolation";
    case ErrorKind::kInvariantViolation: return "InvariantViolation";
    case ErrorKind::kInvalidGridParams: return "InvalidGridParams";
    case ErrorKind::kRouteUnresolvable: return "RouteUnresolvable";
    case ErrorKind::kOutOfRange: return "OutOfRange";
    case ErrorKind::kValidationFailed: return "ValidationFailed";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kCorruptLog: return "CorruptLog";
    case ErrorKind::kSamplingExhausted: return "SamplingExhausted";
    case ErrorKind::kUnknownVehicle: return "UnknownVehicle";
    case ErrorKind::kMissingLag: return "MissingLag";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kNodeSetMismatch: return "NodeSetMismatch";
  }
  return "Unknown";
}

}  // namespace ccity
