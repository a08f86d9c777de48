#pragma once

#include <stdexcept>

namespace xtl {

// Raised when a computation produces a non-finite value (maps to CLI exit 2).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xtl
