#pragma once

#include <stdexcept>
#include <string>

namespace roadflow {

// Input value outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Malformed or inconsistent user-supplied configuration. `code` is a stable
// machine-readable identifier, the what() string carries the human context.
struct ValidationError : std::runtime_error {
  std::string code;
  ValidationError(std::string code_, const std::string& msg)
      : std::runtime_error(msg), code(std::move(code_)) {}
  explicit ValidationError(const std::string& msg)
      : std::runtime_error(msg), code("invalid") {}
};

// Broken precondition between internal components (caller bug).
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace roadflow
