#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sapp {

/// Malformed or truncated file contents. The message names the byte offset
/// (binary files) or line number (text files) where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent model or run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training or gradient checking.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dataset meta file contents that parse but are inconsistent.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sapp
