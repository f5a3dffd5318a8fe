#pragma once

#include <stdexcept>
#include <string>

namespace headhunt {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad shapes, unknown identifiers, corrupt files, stale
// manifests. The CLI maps these to exit status 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value or could not proceed
// numerically. The CLI maps these to exit status 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace headhunt
