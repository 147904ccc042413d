#pragma once

#include <stdexcept>
#include <string>

namespace gcr {

// Failure classes map one-to-one onto CLI exit codes.
enum class ErrorKind {
  kValidation = 1,
  kNumeric = 2,
  kIo = 3,
};

// Fine-grained cause, so callers and tests can tell malformed inputs apart.
enum class ErrorCode {
  kInvalidArgument,
  kMalformedHeader,
  kDimensionMismatch,
  kRowCountMismatch,
  kNonFinite,
  kMalformedMeta,
  kZeroRow,
  kNoQueries,
  kNoGallery,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  ErrorKind kind() const noexcept {
    switch (code_) {
      case ErrorCode::kIo:
        return ErrorKind::kIo;
      case ErrorCode::kZeroRow:
        return ErrorKind::kNumeric;
      default:
        return ErrorKind::kValidation;
    }
  }

  int exit_code() const noexcept { return static_cast<int>(kind()); }

 private:
  ErrorCode code_;
};

}  // namespace gcr
