#pragma once

#include <stdexcept>
#include <string>

namespace tbif {

// Shape disagreement between operands of a tensor operation.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Invalid model, training or generator configuration.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input data that is well-formed but violates a contract (missing field,
// ragged persons, sequence too short, ...).
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed file contents.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failures (unreadable input, unwritable output).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value produced where a finite one is required.
struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tbif
