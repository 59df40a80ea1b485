#pragma once

#include <stdexcept>
#include <string>

namespace gprcp {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SingularExtension : public Error {
 public:
  using Error::Error;
};

class AllRestartsFailed : public Error {
 public:
  using Error::Error;
};

class EmptyRegion : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class UnknownColumn : public Error {
 public:
  using Error::Error;
};

class EmptyAfterCleaning : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration (bad flag, malformed config file).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gprcp
