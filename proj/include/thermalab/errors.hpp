#pragma once

#include <stdexcept>
#include <string>

namespace thermalab {

// Error categories map onto the failure classes used throughout the library:
// bad user configuration, API misuse, resource guards, numerical failure,
// out-of-domain arguments and unreliable fits.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct UsageError : Error {
    using Error::Error;
};

struct ResourceError : Error {
    using Error::Error;
};

struct NumericalError : Error {
    using Error::Error;
};

struct DomainError : Error {
    using Error::Error;
};

struct FitError : Error {
    using Error::Error;
};

} // namespace thermalab
