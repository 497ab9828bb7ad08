#pragma once

#include <stdexcept>
#include <string>

namespace pricesuggest {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes disagree with each other or with a declared architecture.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value left the finite reals (exploding gradients, diverged training).
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// A file could not be parsed or carries an unsupported layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A configuration field is out of its valid range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace detail
}  // namespace pricesuggest
