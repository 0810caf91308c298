#pragma once

#include <stdexcept>
#include <string>

namespace sinpaint {

// Raised for malformed user configuration (bad flags, inconsistent specs).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when tensor or array shapes do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a runtime check on a pipeline invariant fails.
class InvariantError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sinpaint
