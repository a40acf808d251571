#pragma once

#include <stdexcept>
#include <string>

namespace nheavy {

/// Arguments outside an operation's domain (bad sizes, probabilities, parameters).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or non-finite data, optionally tagged with its source location.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nheavy
