#pragma once

#include <stdexcept>
#include <string>

namespace privet {

// Bad input or violated precondition. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File system or parse failure on an external file. Also exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Optimizer or numerical breakdown. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace privet
