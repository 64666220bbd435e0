#pragma once

#include <stdexcept>
#include <string>

namespace keyhead {

/// Violation of an operation's preconditions or an object's invariants.
/// The CLI maps this to exit code 2.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// Shape disagreement between tensors. A kind of contract violation.
class DimensionError : public ContractError {
 public:
  explicit DimensionError(const std::string& what) : ContractError(what) {}
};

/// Malformed input data (bad JSON line, unreadable file). Exit code 3.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace keyhead
