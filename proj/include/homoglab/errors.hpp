#pragma once

#include <stdexcept>
#include <string>

namespace homoglab {

/// Bad input: incompatible resolutions, malformed configs, violated
/// preconditions. The CLI maps this to exit status 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical stage did not meet its tolerance (eigensolver or CG
/// non-convergence, singular resolvent, unbracketed root). Exit status 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace homoglab
