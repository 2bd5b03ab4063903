#pragma once

#include <stdexcept>
#include <string>

namespace blpinn {

// Invalid configuration, bad file format, architecture mismatch.
// The CLI maps this to exit code 2; other exceptions map to 1.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace blpinn
