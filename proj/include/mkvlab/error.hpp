#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mkv {

/// Bad arguments or model parameters that violate a documented precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed run configuration; carries the offending line (0 if unknown)
/// and field name.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, int line = 0, std::string field = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line),
        field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// Non-finite value produced during evaluation or time stepping.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& msg, std::int64_t step = -1)
      : std::runtime_error(step >= 0 ? msg + " (step " + std::to_string(step) + ")" : msg), step_(step) {}

  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

}  // namespace mkv
