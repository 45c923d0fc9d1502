#pragma once

#include <stdexcept>
#include <string>

namespace condscore {

// Raised when user-supplied data or configuration violates a documented
// precondition (maps to CLI exit code 2).
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised on internal numerical failure (maps to CLI exit code 3).
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace condscore
