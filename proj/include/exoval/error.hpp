#pragma once

#include <stdexcept>
#include <string>

namespace exoval {

// Invalid user configuration or arguments (CLI exit code 2).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a formula.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Option price outside the static no-arbitrage bounds.
struct ArbitrageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Iteration failed to converge, or produced a non-finite value.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace exoval
