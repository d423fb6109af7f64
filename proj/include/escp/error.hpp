#pragma once

#include <stdexcept>
#include <string>

namespace escp {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data (bad JSON, dimension mismatch,
// point outside the environment, empty demand list, ...).
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Instance size outside the supported range of an exact routine.
struct SizeError : Error {
    explicit SizeError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value (nonpositive rate, bad resolution, ...).
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace escp
