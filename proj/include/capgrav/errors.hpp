#pragma once

#include <stdexcept>
#include <string>

namespace capgrav {

// Precondition or flag violation detected before any work is done.
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// An iterative procedure failed to converge. `measured` carries the value
// that triggered the failure (ratio, residual, ...).
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double measured)
      : std::runtime_error(what), measured_(measured) {}
  double measured() const { return measured_; }

 private:
  double measured_;
};

}  // namespace capgrav
