#pragma once

#include <stdexcept>
#include <string>

namespace abmuq {

// Malformed or out-of-range user input (config files, CSVs, arguments).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorization failures, non-convergence, degenerate numerical state.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace abmuq
