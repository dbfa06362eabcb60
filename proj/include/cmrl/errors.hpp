#pragma once

#include <stdexcept>
#include <string>

namespace cmrl {

/// Vector or matrix sizes disagree with what a spec or model expects.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A network description violates the graph invariants.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// History records appended out of order, or trial bookkeeping misuse.
class SequencingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Caller broke an operation's precondition (step after done, mismatched spans, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed, truncated or inconsistent file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cmrl
