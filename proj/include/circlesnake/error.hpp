#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace circlesnake {

/// Machine-parsable failure classes; the CLI maps each to its own exit code.
enum class ErrorCategory {
  invalid_input,
  config,
  io,
  checkpoint,
  divergence,
  internal,
};

std::string_view to_string(ErrorCategory category);
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

/// Raised when a precondition on caller-supplied data does not hold.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& message)
      : Error(ErrorCategory::invalid_input, message) {}
};

}  // namespace circlesnake
