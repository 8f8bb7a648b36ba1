#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hbr {

// Argument outside the documented domain of an operation.
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class ArgumentError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration or violated precondition detected before compute.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public ConfigError {
public:
  using ConfigError::ConfigError;
};

// Iteration or root finding that did not reach its tolerance.
class NumericalFailure : public std::runtime_error {
public:
  explicit NumericalFailure(const std::string& what, std::vector<double> history = {})
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

private:
  std::vector<double> history_;
};

}  // namespace hbr
