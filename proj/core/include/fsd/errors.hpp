#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "fsd/types.hpp"

namespace fsd {

/// Precondition violated by a caller (bad argument, empty prefix, tau = 0...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Peer sent something the protocol forbids (round mismatch, p(x) = 0...).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bytes do not form a valid frame.
class DecodeError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Transport failure mid-session. Carries whatever output was committed.
class SessionError : public std::runtime_error {
 public:
  SessionError(const std::string& what, TokenSeq partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const TokenSeq& partial_output() const noexcept { return partial_; }

 private:
  TokenSeq partial_;
};

/// Simulation could not make progress; the trace up to the stall is attached.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(const std::string& what, std::vector<std::string> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<std::string>& trace() const noexcept { return trace_; }

 private:
  std::vector<std::string> trace_;
};

/// Invalid experiment configuration; lists offending field names.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace fsd
