#pragma once

#include <stdexcept>
#include <string>

namespace codkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Conformability violations: mismatched dimensions, non-square inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad or unusable input data (non-finite entries, parse failures, labels
/// that cannot be grouped).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A computation left the domain where it is well defined: non-PSD input to
/// a square root, failed decomposition, divergent training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (unknown keys, missing fields, bad values).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace codkit
