#pragma once

#include <stdexcept>
#include <string>

namespace catgraph {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: files, configurations, invariant violations on construction.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A computation produced non-finite values or failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace catgraph
