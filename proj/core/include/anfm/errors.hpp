#pragma once

#include <stdexcept>
#include <string>

namespace anfm {

// Precondition violations on graph inputs (disconnected graph, bad node id, ...).
class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration values or unknown keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf produced by a numeric routine, or a solver that failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data. The kind distinguishes the failure mode so callers
// (and tests) can tell a bad header from a truncated payload.
class DataError : public std::runtime_error {
 public:
  enum class Kind { kHeader, kBadMagic, kVersion, kTruncated, kMalformed, kIncompatible, kIo };

  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace anfm
