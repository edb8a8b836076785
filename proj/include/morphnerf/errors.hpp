#pragma once

#include <stdexcept>
#include <string>

namespace mnrf {

/// Precondition / contract violations (bad arguments, out-of-range inputs).
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or missing files, format mismatches, version skew.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values in losses, gradients, or parameter updates.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Command-line misuse (unknown flags, missing arguments, unknown config keys).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mnrf
