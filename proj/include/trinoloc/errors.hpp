#pragma once

#include <stdexcept>
#include <string>

namespace trinoloc {

/// Base class for all engine errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid input: out-of-range value, shape mismatch, malformed request.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An all-zero (or non-finite-norm) vector where a direction is required.
/// Callers decide whether to drop the offending record or fail the run.
class DegenerateVectorError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class IoErrorKind {
  not_found,
  truncated,
  bad_magic,
  version_mismatch,
  checksum_mismatch,
  malformed,
  write_failed,
};

/// File and stream failures; `kind()` distinguishes corrupt from missing
/// from incompatible inputs.
class IoError : public Error {
 public:
  IoError(IoErrorKind kind, const std::string& msg) : Error(msg), kind_(kind) {}
  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

/// Unexpected internal state (diverged optimizer, broken invariant).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace trinoloc
