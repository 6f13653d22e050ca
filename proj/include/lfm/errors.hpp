#pragma once

#include <stdexcept>
#include <string>

namespace lfm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Arguments outside an operation's mathematical domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed files (PPM, manifest, checkpoint, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked on an object lacking required recorded state.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace lfm
