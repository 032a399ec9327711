#pragma once

#include <stdexcept>
#include <string>

namespace rfs {

// Base class for every fault this library raises.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed bytes on a wire/file format (bad magic, truncation, version).
struct FormatError : Error {
    using Error::Error;
};

// Invalid configuration or invariant violation detected at load/validate time.
struct ConfigError : Error {
    using Error::Error;
};

// Numerically ill-posed input (degenerate point sets, singular systems).
struct DegeneracyError : Error {
    using Error::Error;
};

// Non-finite values encountered during an iterative computation.
struct NumericError : Error {
    using Error::Error;
};

} // namespace rfs
