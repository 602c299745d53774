#pragma once

#include <stdexcept>
#include <string>

namespace antlgp {

// Bad parameter values or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable input data (CSV rows, program text, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A program genome that cannot be decoded against its VM layout.
class DecodeError : public DataError {
 public:
  using DataError::DataError;
};

// Raised when a conservation or bookkeeping invariant is found broken.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace antlgp
