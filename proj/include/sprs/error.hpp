#pragma once

#include <stdexcept>
#include <string>

namespace sprs {

// Bad geometry, parameter ranges, or malformed configuration files.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or corrupt dataset files.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Inputs whose dimensions disagree with the structure they are applied to.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A mac was driven with no active input on any source.
struct EmptyInputError : std::invalid_argument {
    explicit EmptyInputError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace sprs
