// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gpn {

// Caller passed a value outside an operation's precondition.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Object is in a state that does not permit the requested operation.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Arithmetic undefined at the given input (zero norm, non-finite loss).
class NumericDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed configuration, spec, or file contents.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Synthetic benchmark construction could not satisfy its constraints.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gpn
