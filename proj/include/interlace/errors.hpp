#pragma once

#include <stdexcept>
#include <string>

namespace interlace {

/// A caller broke a documented precondition (bad dimension, empty input, ...).
class ContractError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A computation hit one of its resource guards (memory, rejection attempts,
/// enumeration budget). The message carries the statistics gathered so far.
class BudgetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

}  // namespace interlace
