#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pgff {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested sample needs history (or preview) that is not available.
class ColdStartError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition: dimension mismatch, wrong model class, bad invariant.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Data is not persistently exciting (rank-deficient moment matrix).
class ExcitationError : public Error {
 public:
  using Error::Error;
};

/// A model could not be inverted (zero input coefficient, unstable inverse).
class InversionError : public Error {
 public:
  using Error::Error;
};

/// Every training restart failed.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Simulation left the admissible output range.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Configuration error. Carries the 1-based source line when known (0 otherwise).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Malformed model stream. `offset()` is the byte position where decoding failed.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace pgff
