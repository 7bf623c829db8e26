#include "circlesnake/error.hpp"

namespace circlesnake {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_input: return "invalid_input";
    case ErrorCategory::config: return "config";
    case ErrorCategory::io: return "io";
    case ErrorCategory::checkpoint: return "checkpoint";
    case ErrorCategory::divergence: return "divergence";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_input: return 2;
    case ErrorCategory::config: return 3;
    case ErrorCategory::io: return 4;
    case ErrorCategory::checkpoint: return 5;
    case ErrorCategory::divergence: return 6;
    case ErrorCategory::internal: return 70;
  }
  return 70;
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(message), category_(category) {}

}  // namespace circlesnake
