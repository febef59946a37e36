#pragma once

#include <stdexcept>
#include <string>

namespace vocalbeat {

// Base of every error raised by the toolkit. `kind()` is a stable,
// machine-parsable class name used by the CLI on stderr.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// Caller broke a documented precondition (bad shape, bad config, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid_argument"; }
};

// Input data cannot be used: unreadable file, degenerate signal, etc.
class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "data_error"; }
};

class IoError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "io_error"; }
};

class UnsupportedFormat : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "unsupported_format"; }
};

class DegenerateInput : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "degenerate_input"; }
};

// Binary container errors (SSLB embeddings, VBTM checkpoints).
class FormatError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "format_error"; }
};

class BadMagic : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "bad_magic"; }
};

class VersionMismatch : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "version_mismatch"; }
};

class TruncatedFile : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "truncated"; }
};

}  // namespace vocalbeat
