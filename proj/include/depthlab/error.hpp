#pragma once

#include <stdexcept>
#include <string>

namespace depthlab {

/// Base of every error thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside the domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// A curve evaluated at or past its breakdown point.
struct DivergenceError : DomainError {
    DivergenceError(const std::string& what, double breakdown)
        : DomainError(what), breakdown(breakdown) {}
    double breakdown;
};

/// Malformed configuration or command-line values.
struct ConfigError : Error {
    using Error::Error;
};

/// Bad or degenerate input data (unreadable file, singular design, ...).
struct DataError : Error {
    using Error::Error;
};

/// An iterative routine could not produce a usable answer.
struct NumericalError : Error {
    using Error::Error;
};

}  // namespace depthlab
