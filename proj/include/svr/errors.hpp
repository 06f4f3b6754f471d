#pragma once

#include <stdexcept>
#include <string>

namespace svr {

/// Raised when a factorization or variance recursion breaks down.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svr
