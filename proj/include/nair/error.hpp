#pragma once

#include <stdexcept>
#include <string>

namespace nair {

// Root of every error thrown by the library. The CLI maps subclasses onto
// process exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An integer index (class id, token id) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// A value lies outside its documented domain (e.g. a score outside [1, 10]).
class RangeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

// NaN / Inf showed up where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing on-disk data.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace nair
