#pragma once

#include <stdexcept>
#include <string>

namespace mlap {

/// Invalid user input: bad dimensions, malformed specs, out-of-range parameters.
/// `field()` names the offending input when one exists.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : std::invalid_argument(field.empty() ? what : field + ": " + what),
        message_(what),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }
  /// The message without the field prefix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::string field_;
};

/// A numerical procedure failed (non-convergence, explosion, degenerate
/// Monte Carlo average). The message carries the diagnostics.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mlap
