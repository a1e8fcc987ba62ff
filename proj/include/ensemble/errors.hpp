#pragma once

#include <stdexcept>
#include <string>

namespace ensemble {

// Base class for all library errors so callers can catch solver failures
// generically while the CLI distinguishes configuration problems (exit 2)
// from solver problems (exit 1).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Parameter outside the system's interval, or analogous domain violations.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

// Non-finite or structurally invalid numeric input.
class InvalidInputError : public Error {
 public:
  explicit InvalidInputError(const std::string& what) : Error(what) {}
};

// An InputSignal's time grid does not match the system horizon.
class IncompatibleGridError : public Error {
 public:
  explicit IncompatibleGridError(const std::string& what) : Error(what) {}
};

// Block Gramian failed the definiteness/conditioning gate. Carries the
// condition estimate so callers can report how far gone the matrix is.
class IllConditionedGramianError : public Error {
 public:
  IllConditionedGramianError(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate(condition_estimate) {}
  double condition_estimate;
};

// Single-moment controllability Gramian W(theta) is numerically singular.
class NotControllableAtMomentError : public Error {
 public:
  explicit NotControllableAtMomentError(const std::string& what) : Error(what) {}
};

// Flow integration blew past the divergence guard (step too large).
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(what) {}
};

// Configuration / schema violation (CLI exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace ensemble
