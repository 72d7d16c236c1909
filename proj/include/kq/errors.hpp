#pragma once

#include <stdexcept>
#include <string>

namespace kq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A metric or potential lost positivity (curvature form, Gram matrix).
class PositivityError : public Error {
 public:
  using Error::Error;
};

/// A requested level k exceeds what the model grid was built for.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Operation not available on this model (e.g. scalar curvature on CP2).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Inputs inconsistent with each other (grid mismatch, level mismatch).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration; the message names the field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kq
