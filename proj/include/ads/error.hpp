#pragma once

#include <stdexcept>
#include <string>

namespace ads {

// Base for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid configuration, flags, or schema violations. CLI exit code 1.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or inconsistent input data (corpus, vocabulary, embedding or
// checkpoint files). CLI exit code 1.
struct DataError : Error {
    using Error::Error;
};

// Numerical failures: NaN gradients, divergence, failed gradient checks.
// CLI exit code 3.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace ads
