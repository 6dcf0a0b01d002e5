#pragma once

#include <stdexcept>
#include <string>

namespace trust {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation produced NaN or Inf, or an input that must be finite was not.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A dataset or checkpoint file violates the on-disk format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or an argument outside its domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (open, read, write).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace trust
