#pragma once

#include <stdexcept>
#include <string>

namespace pclt {

/// Malformed input data (bad rows, bad CSV, invalid parameters).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A predictive rule failed or was asked for something it cannot do.
class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A remote endpoint broke the wire protocol or the transport failed.
class ProtocolError : public RuleError {
 public:
  using RuleError::RuleError;
};

/// Connection-level failure (spawn, connect, broken pipe, EOF). Retried
/// once by the remote client.
class TransportError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

class TimeoutError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Numerical failure (indefinite covariance, degenerate regression design).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pclt
