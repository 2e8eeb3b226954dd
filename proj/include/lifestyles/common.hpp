#pragma once

#include <stdexcept>
#include <string>

namespace lifestyles {

// Bad configuration or malformed user input. The CLI maps this to exit code 1;
// everything else derived from std::exception maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lifestyles
