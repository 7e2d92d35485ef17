#pragma once

#include <stdexcept>
#include <string>

namespace bridle {

// Error categories map onto CLI exit codes (see tools/bridle.cpp).
enum class ErrorKind {
  invalid_input,
  insufficient_data,
  degenerate,
  format,
  validation,
  divergence,
  bound_violation,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::format: return "format";
    case ErrorKind::validation: return "validation";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::bound_violation: return "bound_violation";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Config validation failure; `key()` names the offending key.
class ValidationError : public Error {
 public:
  ValidationError(std::string key, const std::string& message)
      : Error(ErrorKind::validation, key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Runtime check of a proven bound; carries the step at which it fired.
class BoundViolation : public Error {
 public:
  BoundViolation(long step, const std::string& message)
      : Error(ErrorKind::bound_violation,
              "step " + std::to_string(step) + ": " + message),
        step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

#define BRIDLE_REQUIRE(cond, kind, msg)            \
  do {                                             \
    if (!(cond)) throw ::bridle::Error((kind), (msg)); \
  } while (0)

}  // namespace bridle
