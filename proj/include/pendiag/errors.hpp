#pragma once

#include <stdexcept>
#include <string>

namespace pendiag {

// Error categories map 1:1 onto the CLI exit codes (see tools/).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration (invalid shape chain, window mismatch, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or unusable input data (parse errors, schema errors, bad labels, ...).
struct DataError : Error {
    using Error::Error;
};

// Numerical failure (non-finite loss, divide-by-zero timestamps, failed checks).
struct NumericError : Error {
    using Error::Error;
};

// Filesystem / IO failure.
struct IoError : Error {
    using Error::Error;
};

} // namespace pendiag
