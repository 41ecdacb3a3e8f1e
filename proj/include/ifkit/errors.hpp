#pragma once

#include <stdexcept>
#include <string>

namespace ifkit {

// Base for everything thrown by this library on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: malformed data files, unknown ids, values out of contract.
// The CLI maps these to exit code 1.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed or contradictory configuration.
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

// The host is missing something we need (linter binary, python, spawn
// failure, version mismatch). The CLI maps these to exit code 2.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

// A remote or mock model client failed after all retries.
class ClientError : public Error {
 public:
  using Error::Error;
};

}  // namespace ifkit
