#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace normprimes {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class PoleError : public DomainError {
 public:
  using DomainError::DomainError;
};

class DivergenceError : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateInputError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Integer overflow of a checked intermediate.
class RangeError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Two independent computations of the same quantity disagree.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// A quadrature or root finder did not reach its tolerance. Carries the
/// best estimate obtained before giving up.
class AccuracyError : public Error {
 public:
  AccuracyError(const std::string& what, double best_estimate)
      : Error(what), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointMismatch : public Error {
 public:
  CheckpointMismatch(const std::string& what, std::vector<std::string> diff)
      : Error(what), diff_(std::move(diff)) {}
  const std::vector<std::string>& diff() const noexcept { return diff_; }

 private:
  std::vector<std::string> diff_;
};

/// Raised when a run is stopped on request before all shards finished.
class Interrupted : public Error {
 public:
  using Error::Error;
};

}  // namespace normprimes
