#pragma once

#include <stdexcept>
#include <string>

namespace flexsched {

// Diagnostic categories double as CLI exit codes.
enum class ErrorCategory : int {
  Internal = 1,
  InvalidInput = 2,
  Config = 3,
  Io = 4,
  Solver = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorCategory::InvalidInput, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::Config, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what)
      : Error(ErrorCategory::Solver, what) {}
};

const char* to_string(ErrorCategory category) noexcept;

}  // namespace flexsched
