#pragma once

#include <stdexcept>

namespace demix {

// Bad arguments, inconsistent shapes, infeasible configurations.
// The CLI maps this to exit code 1.
class parameter_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical breakdown: NaNs in iterates, singular interpolation systems,
// ill-conditioned point spread functions, exhausted sampling budgets.
// The CLI maps this to exit code 2.
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace demix
