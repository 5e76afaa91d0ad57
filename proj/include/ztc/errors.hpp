#pragma once

#include <stdexcept>
#include <string>

namespace ztc {

// Bad experiment configuration (unknown keys, out-of-range values). CLI exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input data (missing files, parse failures, invariant violations). CLI exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ztc
