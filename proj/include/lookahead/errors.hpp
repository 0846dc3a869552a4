#pragma once

#include <stdexcept>
#include <string>

namespace lookahead {

// Invalid configuration, malformed input files, contract violations by the
// caller. Mapped to exit code 2 by the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite losses and other numerical breakdowns. Mapped to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace lookahead
