#pragma once

#include <stdexcept>
#include <string>

namespace nfheat {

/// Bad input: maps to exit status 2 in the CLI.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during a computation: exit status 1.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nfheat
