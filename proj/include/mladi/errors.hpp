#pragma once

#include <stdexcept>
#include <string>

namespace mladi {

// Exit-code taxonomy used by the CLI: usage=1, data=2, external service=3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ExternalServiceError : std::runtime_error {
  explicit ExternalServiceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mladi
