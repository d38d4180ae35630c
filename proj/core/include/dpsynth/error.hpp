#pragma once

#include <stdexcept>
#include <string>

namespace dpsynth {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, unwritable or malformed files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (shape mismatch, odd size, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Physically or logically impossible configuration (e.g. focus inside the focal length).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpsynth
