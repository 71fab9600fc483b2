#pragma once

#include <stdexcept>
#include <string>

namespace wavessm {

// Numeric values are part of the C ABI (see wavessm.h) and double as CLI exit codes.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kIo = 2,
  kFormat = 3,
  kNumeric = 4,
  kInternal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kInvalidArgument, what) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorCode::kNumeric, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCode::kIo, what) {}
};

struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCode::kFormat, what) {}
};

}  // namespace wavessm
