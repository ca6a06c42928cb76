#pragma once

#include <stdexcept>
#include <string>

namespace qkdioc {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File missing or unreadable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed document syntax.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A parameter or document violates a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Not enough data to compute the requested statistic.
class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A calibration baseline required by the run is absent.
class MissingBaseline : public Error {
 public:
  using Error::Error;
};

}  // namespace qkdioc
