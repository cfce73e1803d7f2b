#pragma once

#include <stdexcept>
#include <string>

namespace codriver {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario, route, or simulator configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace codriver
