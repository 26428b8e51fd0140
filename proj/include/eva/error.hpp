#pragma once

#include <stdexcept>
#include <string>

namespace eva {

// Bad configuration: invalid parameter combinations, malformed config documents,
// unknown keys. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad data: dimension mismatches, corrupt containers, out-of-range values,
// unreadable inputs. CLI maps this to exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A check that compares two computation paths disagreed. CLI maps this to exit code 4.
struct VerifyError : std::runtime_error {
    explicit VerifyError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace eva
