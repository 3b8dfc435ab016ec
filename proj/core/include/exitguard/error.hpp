#pragma once

#include <stdexcept>
#include <string>

namespace exitguard {

// Error hierarchy. The CLI maps ConfigError to status 2 and everything else
// to status 1, so keep configuration problems distinct from runtime ones.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "runtime"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "invalid-input"; }
};

class CalibrationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "calibration"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "parse"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

// Value parsed correctly but lies outside the accepted magnitude range.
class RangeError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "range"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "training-diverged"; }
};

}  // namespace exitguard
