#pragma once

#include <stdexcept>
#include <string>

namespace adrd {

// Unreadable files, malformed checkpoints, unsupported image formats.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses or gradients, degenerate metric inputs.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad flag combinations or config values.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace adrd
