#pragma once

#include <stdexcept>
#include <string>

namespace sf {

// Error classes surfaced through the C API as distinct status codes.
enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kState,
  kIo,
  kFormat,
  kUnsupportedVersion,
  kCorruption,
  kConfigMismatch,
  kNumeric,
  kPartialFailure,
  kUsage,
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

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace sf
