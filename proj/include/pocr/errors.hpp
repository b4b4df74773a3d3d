#pragma once

#include <stdexcept>
#include <string>

namespace pocr {

// Base for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad invocation or an impossible request (missing checkpoint, bad flag combo).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Malformed or inconsistent data on disk (images, annotations, checkpoints).
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

// NaN/Inf encountered, or an iteration diverged.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Tensor shape or arity mismatch; always names the offending shapes.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Value outside its documented domain (coordinate out of image, id out of vocab).
class RangeError : public Error {
 public:
  explicit RangeError(const std::string& msg) : Error(msg) {}
};

enum class CheckpointErrorCode {
  BadMagic,
  VersionMismatch,
  Truncated,
  ConfigMismatch,
};

class CheckpointError : public DataError {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& msg)
      : DataError(msg), code_(code) {}
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

}  // namespace pocr
