#pragma once

#include <stdexcept>

namespace puflock {

/// Base class for all puflock errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument value (bad percentage, zero sizes, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// Shape mismatch between tensors, models, datasets or helper data.
struct DimensionError : Error {
  using Error::Error;
};

/// Malformed, truncated or unwritable file content.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace puflock
