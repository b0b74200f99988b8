#pragma once

#include <stdexcept>
#include <string>

namespace hiergame {

// Bad user input: malformed arguments, invalid schedule parameters, unknown
// benchmark names.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// Invalid configuration detected before any work starts (file schema,
// non-contracting solver settings, non-concave gap instances).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Query outside the admissible domain, e.g. an oracle evaluated outside the
// enlarged feasible set.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// An iterative routine ran out of budget. Carries the last residual so
// callers can report how close the run got.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

// Non-finite values in an iterate; carries no recovery semantics.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hiergame
