#pragma once

#include <stdexcept>
#include <string>

namespace credassign {

/// Base class for all errors raised by the library. Subclasses map to
/// distinct CLI exit codes (see tools/cli_main.cpp and README).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor shapes incompatible with the requested operation.
struct DimensionError : Error {
    using Error::Error;
};

/// A scalar argument outside its valid range (e.g. a class label).
struct DomainError : Error {
    using Error::Error;
};

/// Malformed file contents (dataset records, checkpoints, dumps).
struct FormatError : Error {
    using Error::Error;
};

/// Missing or unreadable path.
struct IoError : Error {
    using Error::Error;
};

/// Operation called in the wrong order (e.g. backward before forward).
struct StateError : Error {
    using Error::Error;
};

/// Invalid configuration (missing feedback tensor, empty grid, ...).
struct ConfigError : Error {
    using Error::Error;
};

/// A data subset selection produced no samples.
struct EmptySubsetError : Error {
    using Error::Error;
};

/// Non-finite values where finite ones are required (diverged loss, NaN grads).
struct NumericError : Error {
    using Error::Error;
};

} // namespace credassign
