// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace rewritelab {

/// Caller supplied an argument or configuration that violates a precondition.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The requested amount of distinct objects cannot be produced from the given
/// alphabet / grammar.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constrained sampler could not satisfy its constraint.
class UnsatisfiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bounded retry loop in a generator gave up.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed text input (rule files, expressions, dataset lines).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " (at " + std::to_string(position) + ")"), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// Batch prompt/completion exchange with an external model broke its contract.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rewritelab
