#pragma once

#include <stdexcept>
#include <string>

namespace lfagcl {

// File unreadable, unwritable, or truncated.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data violates the expected shape (empty file, degenerate split, ...).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration value or unknown config key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss, objective, or gradient.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lfagcl
