#pragma once

#include <stdexcept>
#include <string>

namespace emd {

// Base of every error raised by the library. The subclasses map onto the
// command-line exit codes (config 2, numeric 3, I/O 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, shapes, or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or diverging computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File system and container-format failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// A file was readable but its contents violate the declared format.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace emd
