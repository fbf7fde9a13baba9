#pragma once

#include <stdexcept>
#include <string>

namespace gsopt {

/// Bad argument to an operation: non-finite values, mismatched shapes, empty inputs.
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or incomplete file content.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inconsistent training or scene configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Broken internal invariant (misaligned state arrays, contradictory index sets).
class ConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace gsopt
