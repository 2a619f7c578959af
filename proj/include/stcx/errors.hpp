#pragma once

#include <stdexcept>
#include <string>

namespace stcx {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Mismatched extents, invalid axes, malformed boxes.
struct ShapeError : Error {
    using Error::Error;
};

// Bad config values, unknown flags, incompatible dimensions.
struct ConfigError : Error {
    using Error::Error;
};

// Non-finite values during training or gradient probing.
struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace stcx
