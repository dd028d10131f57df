#pragma once

#include <stdexcept>
#include <string>

namespace gtring {

/// Invalid experiment or partition configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An index or rank outside its valid range.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A caller broke an API precondition (shape mismatch, double wait, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Failure inside a transport (socket error, truncated payload, ...).
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A blocking wait exceeded the configured timeout.
class TransportTimeout : public TransportError {
 public:
  using TransportError::TransportError;
};

/// The experiment stalled; the message names the stalled (rank, lane, step).
class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A normalized error metric was requested against an all-zero reference.
class NormalizationError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace gtring
