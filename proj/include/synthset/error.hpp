#pragma once

#include <stdexcept>
#include <string>

namespace synthset {

/// Invalid or missing configuration. Maps to CLI exit status 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that cannot be processed. Maps to CLI exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace synthset
