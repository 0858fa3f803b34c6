#pragma once

#include <stdexcept>
#include <string>

namespace pnl {

// Raised when a configuration or precondition is violated. The CLI maps it
// to exit code 2.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// Raised when a numerical procedure cannot produce a usable result. The CLI
// maps it to exit code 3.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond)
        throw ConfigError(msg);
}

}  // namespace pnl
