#include "common/error.hpp"

namespace sf {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kConfig: return "configuration";
    case ErrorCode::kState: return "state";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kFormat: return "format";
    case ErrorCode::kUnsupportedVersion: return "unsupported-version";
    case ErrorCode::kCorruption: return "corruption";
    case ErrorCode::kConfigMismatch: return "config-mismatch";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kPartialFailure: return "partial-failure";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

}  // namespace sf
